"""KP and KdV: residuals, a KdV solver, numeric conservation of the symbolic densities.

The KdV reduction u_t = u_xxx / 4 + 3 u u_x is integrated by the method of lines
on a periodic grid.  The nonlinear term is written in skew-symmetric form,
3 u u_x = (u^2)_x + u u_x, so that with an antisymmetric central stencil both the
mass and the L2 norm are invariants of the semi-discrete system.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import diffpoly, numgrid
from ..errors import NumericFailure

ABS_FLOOR = 1e-12


# -- residuals --------------------------------------------------------------------


def _d(f, axis, h, order=1, boundary=numgrid.DECAYING, accuracy=4):
    return numgrid.derivative(f, axis, h, boundary, order, accuracy)


def kp_residual(u: np.ndarray, ht: float, hx: float, hy: float | None = None,
                boundary: str = numgrid.DECAYING, accuracy: int = 4) -> np.ndarray:
    """(u_t - u_xxx/4 - 3 u u_x)_x - (3/4) u_yy for u indexed (t, x[, y])."""
    u = np.asarray(u, float)
    if u.shape[0] < 3:
        raise ValueError("need at least three time slices")
    ut = _d(u, 0, ht, accuracy=accuracy)
    inner = ut - 0.25 * _d(u, 1, hx, 3, boundary, accuracy) - 3 * u * _d(u, 1, hx, 1, boundary, accuracy)
    res = _d(inner, 1, hx, 1, boundary, accuracy)
    if u.ndim == 3:
        if hy is None:
            raise ValueError("hy is required for fields with a y axis")
        res = res - 0.75 * _d(u, 2, hy, 2, boundary, accuracy)
    return res


def kp_potential_residual(v: np.ndarray, ht: float, hx: float, hy: float | None = None,
                          boundary: str = numgrid.DECAYING, accuracy: int = 4) -> np.ndarray:
    """v_xt - v_xxxx/4 + 3 v_x v_xx - (3/4) v_yy for v indexed (t, x[, y])."""
    v = np.asarray(v, float)
    if v.shape[0] < 3:
        raise ValueError("need at least three time slices")
    vx = _d(v, 1, hx, 1, boundary, accuracy)
    res = _d(vx, 0, ht, accuracy=accuracy) - 0.25 * _d(v, 1, hx, 4, boundary, accuracy) \
        + 3 * vx * _d(v, 1, hx, 2, boundary, accuracy)
    if v.ndim == 3:
        if hy is None:
            raise ValueError("hy is required for fields with a y axis")
        res = res - 0.75 * _d(v, 2, hy, 2, boundary, accuracy)
    return res


def kdv_soliton(x, t, kappa: float = 1.0, x0: float = 0.0, period: float | None = None) -> np.ndarray:
    """kappa^2 sech^2(kappa (x - x0 + kappa^2 t)), optionally summed over periodic images."""
    x = np.asarray(x, float)

    def one(s):
        return kappa**2 / np.cosh(kappa * s) ** 2

    s = x - x0 + kappa**2 * t
    if period is None:
        return one(s)
    s = (s + period / 2) % period - period / 2
    return one(s) + one(s - period) + one(s + period)


# -- KdV solver ---------------------------------------------------------------------


@dataclass(frozen=True)
class KdVTrajectory:
    times: np.ndarray
    x: np.ndarray
    u: np.ndarray          # (T, nx)
    steps: np.ndarray

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    def grid(self) -> numgrid.Grid:
        return numgrid.Grid((numgrid.Axis("x", float(self.x[0]), self.dx, self.x.size, numgrid.PERIODIC),))


def kdv_rhs(u: np.ndarray, dx: float, accuracy: int = 4) -> np.ndarray:
    D = lambda f, k=1: numgrid.derivative(f, 0, dx, numgrid.PERIODIC, k, accuracy)
    return 0.25 * D(u, 3) + D(u * u) + u * D(u)


def kdv_integrate(u0: np.ndarray, dx: float, dt: float, steps: int, record_every: int = 1,
                  x0: float = 0.0, accuracy: int = 4, blowup: float = 1e6) -> KdVTrajectory:
    """RK4 in time on the periodic method-of-lines system; aborts if |u| exceeds ``blowup``."""
    if not (dt > 0 and dx > 0):
        raise ValueError("dt and dx must be positive")
    if steps < 0 or record_every < 1:
        raise ValueError("steps must be >= 0 and record_every >= 1")
    u = np.array(u0, float)
    rhs = lambda w: kdv_rhs(w, dx, accuracy)
    ts, us, ns = [0.0], [u.copy()], [0]
    for n in range(1, steps + 1):
        u = numgrid.rk4_step(u, rhs, dt)
        if np.max(np.abs(u)) > blowup:
            raise NumericFailure(f"KdV solution blew up at step {n} (reduce dt)")
        if n % record_every == 0 or n == steps:
            ts.append(n * dt)
            us.append(u.copy())
            ns.append(n)
    x = x0 + dx * np.arange(u.size)
    return KdVTrajectory(np.array(ts), x, np.array(us), np.array(ns))


def soliton_run(n: int = 512, length: float = 40.0, kappa: float = 1.0, dt: float = 1e-3,
                t_end: float = 10.0, record_every: int = 100) -> KdVTrajectory:
    """Periodic soliton run on [-L/2, L/2)."""
    dx = length / n
    x = -length / 2 + dx * np.arange(n)
    steps = int(round(t_end / dt))
    return kdv_integrate(kdv_soliton(x, 0.0, kappa, period=length), dx, dt, steps,
                         record_every, x0=float(x[0]))


# -- conservation of the symbolic densities -----------------------------------------------


@dataclass(frozen=True)
class DensitySeries:
    times: np.ndarray
    steps: np.ndarray
    Q: np.ndarray          # (T, M + 1)
    densities: tuple

    def drift(self, m: int) -> np.ndarray:
        """|Q(t) - Q(0)| relative to |Q(0)|, absolute when |Q(0)| is below 1e-12."""
        q = self.Q[:, m]
        ref = abs(q[0])
        dev = np.abs(q - q[0])
        return dev / ref if ref > ABS_FLOOR else dev

    @property
    def relative(self) -> np.ndarray:
        return np.stack([self.drift(m) for m in range(self.Q.shape[1])], axis=1)


def kp_conservation_check(fields, M: int = 3, times=None, steps=None, accuracy: int = 4,
                          tol: float = 1e-9) -> DensitySeries:
    """Q^(m)(t) = integral of phi^(m)_x over the grid for each slice of ``fields``.

    ``fields`` is a :class:`KdVTrajectory` or a sequence of :class:`SampledField`
    slices over (x) or (x, y).
    """
    if isinstance(fields, KdVTrajectory):
        grid = fields.grid()
        times, steps = fields.times, fields.steps
        slices = [numgrid.SampledField(grid, u) for u in fields.u]
    else:
        slices = list(fields)
        times = np.arange(len(slices), dtype=float) if times is None else np.asarray(times)
        steps = np.arange(len(slices)) if steps is None else np.asarray(steps)
    dens = diffpoly.kp_density_recursion(M)
    Q = np.zeros((len(slices), M + 1))
    for i, f in enumerate(slices):
        for m, p in enumerate(dens):
            val = diffpoly.evaluate(p, f, accuracy, tol)
            for ax in reversed(range(f.grid.ndim)):
                a = f.grid.axes[ax]
                val = numgrid.trapezoid(val, ax, a.step, a.boundary)
            Q[i, m] = float(np.real(val))
    return DensitySeries(np.asarray(times, float), np.asarray(steps), Q, tuple(dens))


# -- exactness ----------------------------------------------------------------------------


def kp_delta(f: np.ndarray, hx: float, hy: float, boundary: str = numgrid.DECAYING, accuracy: int = 4):
    """delta f for a function on (x, y): returns (J0_0, J0_1, J1), the coefficients of
    d_x^0 tau, d_x^1 tau and xi."""
    fx = _d(f, 0, hx, 1, boundary, accuracy)
    fy = _d(f, 1, hy, 1, boundary, accuracy)
    fxx = _d(f, 0, hx, 2, boundary, accuracy)
    return 1.5 * (fy + fxx), 3.0 * fx, fx


def kp_closure_residual(J00, J01, J1, hx, hy, boundary=numgrid.DECAYING, accuracy: int = 4) -> float:
    """Sup of the delta-closure components of J = (J00 + J01 d_x) tau + J1 xi."""
    r1 = np.asarray(J01) - 3.0 * np.asarray(J1)
    r2 = 1.5 * (_d(J1, 1, hy, 1, boundary, accuracy) + _d(J1, 0, hx, 2, boundary, accuracy)) \
        - _d(J00, 0, hx, 1, boundary, accuracy)
    return float(max(np.max(np.abs(r1)), np.max(np.abs(r2))))


def kp_exactness_primitive(J00, J01, J1, hx: float, hy: float, boundary: str = numgrid.DECAYING,
                           tol: float = 1e-6, accuracy: int = 4):
    """chi = x-primitive of J1 from the left edge, for a delta-closed J.

    Returns (chi, residual) where residual is the sup of delta chi - J.
    """
    closure = kp_closure_residual(J00, J01, J1, hx, hy, boundary, accuracy)
    if closure > tol:
        raise ValueError(f"current is not delta-closed (residual {closure:.3g} > {tol:g})")
    chi = numgrid.cumulative(np.asarray(J1, float), 0, hx, boundary)
    K00, K01, K1 = kp_delta(chi, hx, hy, boundary, accuracy)
    res = max(np.max(np.abs(K00 - J00)), np.max(np.abs(K01 - J01)), np.max(np.abs(K1 - J1)))
    return chi, float(res)
