"""Principal chiral models in two and three dimensions: evolution, nonlocal charges, residuals.

Charges are computed slice by slice with the generic tower.  On a slice the
coefficients are jets: the x-primitive knows its own x- and t-derivatives exactly
(they are the components of the current it inverts), while other derivatives fall
back to finite differences along sampled axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import numgrid
from ..algebra import BiComplexSpec, DeltaPrimitive, GaugedBiComplex, GradedElement, Tower, build_tower
from ..coefficients import Jet, JetAlgebra
from ..errors import NumericFailure

DET_MIN = 1e-8

PAULI = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex)


# -- matrix helpers -------------------------------------------------------------


def expm(a: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Matrix exponential of a stack of square matrices: Taylor series with scaling and squaring."""
    a = np.asarray(a, dtype=complex)
    norm = np.max(np.sum(np.abs(a), axis=-1)) if a.size else 0.0
    s = max(0, int(np.ceil(np.log2(norm / 0.5))) if norm > 0.5 else 0)
    x = a / 2.0**s
    eye = np.broadcast_to(np.eye(a.shape[-1], dtype=complex), a.shape)
    out = eye.copy()
    term = eye.copy()
    for k in range(1, 40):
        term = term @ x / k
        out = out + term
        if np.max(np.abs(term)) < tol * 1e-4:
            break
    for _ in range(s):
        out = out @ out
    return out


def su2(coeffs: np.ndarray) -> np.ndarray:
    """i sum_j c_j sigma_j for coefficient arrays with a trailing axis of length 3."""
    return 1j * np.einsum("...j,jab->...ab", np.asarray(coeffs, float), PAULI)


def su2_exp(coeffs: np.ndarray) -> np.ndarray:
    """Closed form exp(i c.sigma) = cos|c| + i sin|c| c.sigma/|c|."""
    c = np.asarray(coeffs, float)
    r = np.linalg.norm(c, axis=-1)
    safe = np.where(r > 0, r, 1.0)
    sinc = np.where(r > 0, np.sin(r) / safe, 1.0)
    eye = np.eye(2, dtype=complex)
    return np.cos(r)[..., None, None] * eye + sinc[..., None, None] * su2(c)


def inv(g: np.ndarray) -> np.ndarray:
    det = np.linalg.det(g)
    bad = np.abs(det) < DET_MIN
    if np.any(bad):
        idx = np.argwhere(bad)[0]
        raise NumericFailure(f"det g collapsed below {DET_MIN:g} at grid index {tuple(int(i) for i in idx)}")
    return np.linalg.inv(g)


def maurer_cartan(g: np.ndarray, axis: int, h: float, boundary: str, accuracy: int = 4) -> np.ndarray:
    """g^-1 dg/dx_axis by finite differences."""
    return inv(g) @ numgrid.derivative(g, axis, h, boundary, 1, accuracy)


def commutator(a, b):
    return a @ b - b @ a


# -- 2D evolution ------------------------------------------------------------------


@dataclass(frozen=True)
class ChiralTrajectory:
    """Slices of g and a = g^-1 g_t at the recorded times, on a uniform x grid."""

    times: np.ndarray
    x: np.ndarray
    g: np.ndarray          # (T, nx, N, N)
    a: np.ndarray          # (T, nx, N, N)
    boundary: str = numgrid.DECAYING

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    def b(self, i: int, accuracy: int = 4) -> np.ndarray:
        return maurer_cartan(self.g[i], 0, self.dx, self.boundary, accuracy)


def chiral_integrate(g0: np.ndarray, a0: np.ndarray, dx: float, dt: float, steps: int,
                     boundary: str = numgrid.DECAYING, record_every: int = 1,
                     accuracy: int = 4) -> ChiralTrajectory:
    """Lie-group leapfrog for the zero-curvature form of the chiral equation.

    With a = g^-1 g_t and b = g^-1 g_x the equation reads a_t = b_x.  ``a`` lives at
    half steps, a^{n+1/2} = a^{n-1/2} + dt (b^n)_x, and g^{n+1} = g^n exp(dt a^{n+1/2}).
    Recorded a at integer steps is the mean of the neighbouring half steps.
    """
    if not (dt > 0 and dx > 0):
        raise ValueError("dt and dx must be positive")
    g = np.array(g0, dtype=complex)
    a0 = np.array(a0, dtype=complex)
    if g.ndim != 3 or g.shape[1] != g.shape[2] or a0.shape != g.shape:
        raise ValueError("expected g0 and a0 with shape (nx, N, N)")
    inv(g)
    x = dx * (np.arange(g.shape[0]) - (g.shape[0] - 1) / 2)

    def bx(gg):
        return numgrid.derivative(maurer_cartan(gg, 0, dx, boundary, accuracy), 0, dx, boundary, 1, accuracy)

    force = bx(g)
    a_half = a0 + 0.5 * dt * force
    ts, gs, As = [0.0], [g.copy()], [a0.copy()]
    for n in range(1, steps + 1):
        g = g @ expm(dt * a_half)
        force = bx(g)
        a_next = a_half + dt * force
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(a_next))):
            raise NumericFailure(f"non-finite chiral field at step {n}")
        if n % record_every == 0 or n == steps:
            ts.append(n * dt)
            gs.append(g.copy())
            As.append(0.5 * (a_half + a_next))
        a_half = a_next
    return ChiralTrajectory(np.array(ts), x, np.array(gs), np.array(As), boundary)


def su2_pulse(n: int = 512, half_width: float = 12.0, amplitude: float = 0.6, width: float = 1.5,
              kick: float = 0.5):
    """Localized SU(2) initial data: g0 = exp(i(alpha sigma_1 + beta sigma_2)), a0 = i gamma sigma_3.

    Returns (x, g0, a0).  The profiles are Gaussians, so g0 -> I and a0 -> 0 at the edges.
    """
    x = np.linspace(-half_width, half_width, n)
    env = np.exp(-(x / width) ** 2)
    alpha = amplitude * env
    beta = 0.7 * amplitude * env * x / width
    gamma = kick * np.exp(-((x - 0.5) / width) ** 2)
    g0 = su2_exp(np.stack([alpha, beta, 0 * x], axis=-1))
    a0 = su2(np.stack([0 * x, 0.3 * gamma, gamma], axis=-1))
    return x, g0, a0


def chiral_pde_residual(traj: ChiralTrajectory, accuracy: int = 4) -> np.ndarray:
    """(g^-1 g_t)_t - (g^-1 g_x)_x on interior recorded slices by finite differences in t and x."""
    if traj.times.size < 3:
        raise ValueError("need at least three slices")
    ht = float(traj.times[1] - traj.times[0])
    bs = np.array([traj.b(i, accuracy) for i in range(traj.times.size)])
    at = numgrid.derivative(traj.a, 0, ht, numgrid.DECAYING, 1, accuracy)
    bxx = numgrid.derivative(bs, 1, traj.dx, traj.boundary, 1, accuracy)
    return (at - bxx)[1:-1]


# -- tower per slice -----------------------------------------------------------------


def chiral_calculus(nx: int, N: int, dx: float, boundary: str = numgrid.DECAYING,
                    accuracy: int = 4, tol: float = 1e-10) -> BiComplexSpec:
    """Generators (delta t, delta x): delta f = f_t dt + f_x dx, d f = f_x dt + f_t dx on one slice."""
    alg = JetAlgebra((nx,), N, {"x": (0, dx, boundary)}, ("t", "x"))
    Dt, Dx = alg.derivation("t", accuracy), alg.derivation("x", accuracy)
    return BiComplexSpec(alg, M=(Dx, Dt), N=(Dt, Dx), tol=tol, names=("dt", "dx"))


def chiral_gauge(spec: BiComplexSpec, a: np.ndarray, b: np.ndarray) -> GaugedBiComplex:
    """A = g^-1 dg = b dt + a dx with B = 0 (a = g^-1 g_t, b = g^-1 g_x)."""
    return GaugedBiComplex(spec, A=spec.one_form([Jet(np.asarray(b)), Jet(np.asarray(a))]))


def line_primitive(spec: BiComplexSpec, along: int, axis_name: str, other_name: str,
                   grid_axis: int, h: float, boundary: str, tol: float = 1e-9) -> DeltaPrimitive:
    """chi = integral from the left edge of the ``along`` component; both first derivatives are exact."""
    other = 1 - along

    def solve(J: GradedElement) -> GradedElement:
        if J.degree != 1:
            raise ValueError("the line primitive inverts delta on 1-forms")
        Jl = J.component((along,)).value if (along,) in J.terms else spec.algebra.zero().value
        Jo = J.component((other,)).value if (other,) in J.terms else spec.algebra.zero().value
        chi = numgrid.cumulative(Jl, grid_axis, h, boundary, tol)
        return spec.function(Jet(chi, {axis_name: Jl, other_name: Jo}))

    return DeltaPrimitive(solve, base_point=f"left edge of {axis_name}")


def chiral_slice_tower(a: np.ndarray, b: np.ndarray, dx: float, M: int,
                       boundary: str = numgrid.DECAYING, accuracy: int = 4) -> Tower:
    nx, N = a.shape[0], a.shape[-1]
    spec = chiral_calculus(nx, N, dx, boundary, accuracy)
    g = chiral_gauge(spec, a, b)
    chi0 = spec.function(spec.algebra.one())
    return build_tower(g, chi0, line_primitive(spec, 1, "x", "t", 0, dx, boundary), M)


def tower_charges(t: Tower, dx: float, boundary: str = numgrid.DECAYING) -> np.ndarray:
    """Q^(m) = integral of the dx component of J^(m), m = 1..M; shape (M, N, N)."""
    out = []
    for J in t.currents:
        comp = J.component((1,)).value if (1,) in J.terms else t.gauged.spec.algebra.zero().value
        out.append(numgrid.trapezoid(comp, 0, dx, boundary))
    return np.array(out)


def closed_form_Q2(a: np.ndarray, b: np.ndarray, dx: float, boundary: str = numgrid.DECAYING) -> np.ndarray:
    """Integral of g^-1 g_x + g^-1 g_t times the running integral of g^-1 g_t."""
    inner = numgrid.cumulative(a, 0, dx, boundary)
    return numgrid.trapezoid(b + a @ inner, 0, dx, boundary)


@dataclass(frozen=True)
class ChargeSeries:
    times: np.ndarray
    Q: np.ndarray          # (T, M, N, N)
    closed_Q2: np.ndarray  # (T, N, N)

    def drift(self, m: int) -> np.ndarray:
        """||Q(t) - Q(0)|| / ||Q(0)|| in the Frobenius norm (absolute if ||Q(0)|| < 1e-12)."""
        q = self.Q[:, m - 1]
        ref = np.linalg.norm(q[0])
        dev = np.linalg.norm((q - q[0]).reshape(len(q), -1), axis=1)
        return dev / ref if ref > 1e-12 else dev

    @property
    def q2_gap(self) -> float:
        if self.Q.shape[1] < 2:
            return float("nan")
        return float(np.max(np.abs(self.Q[:, 1] - self.closed_Q2)))


def chiral_charges(traj: ChiralTrajectory, M: int = 2, accuracy: int = 4) -> ChargeSeries:
    Qs, closed = [], []
    for i in range(traj.times.size):
        a, b = traj.a[i], traj.b(i, accuracy)
        t = chiral_slice_tower(a, b, traj.dx, M, traj.boundary, accuracy)
        Qs.append(tower_charges(t, traj.dx, traj.boundary))
        closed.append(closed_form_Q2(a, b, traj.dx, traj.boundary))
    return ChargeSeries(traj.times, np.array(Qs), np.array(closed))


def series_conservation_residual(traj: ChiralTrajectory, lam: float, order: int, accuracy: int = 4) -> float:
    """Max over interior slices of (chi_t + a chi)_t - (chi_x + b chi)_x for the truncated series.

    The t-derivative across slices is taken by finite differences; the value is
    normalised by the size of the current.
    """
    Jx, Jt = [], []
    for i in range(traj.times.size):
        a, b = traj.a[i], traj.b(i, accuracy)
        tw = chiral_slice_tower(a, b, traj.dx, max(order, 1), traj.boundary, accuracy)
        jx = sum(lam ** m * tw.J(m).component((1,)).value for m in range(1, order + 1))
        jt = sum(lam ** m * tw.J(m).component((0,)).value for m in range(1, order + 1))
        Jx.append(jx)
        Jt.append(jt)
    Jx, Jt = np.array(Jx), np.array(Jt)
    ht = float(traj.times[1] - traj.times[0])
    res = numgrid.derivative(Jx, 0, ht, numgrid.DECAYING, 1, accuracy) \
        - numgrid.derivative(Jt, 1, traj.dx, traj.boundary, 1, accuracy)
    return float(np.max(np.abs(res[2:-2, 4:-4])) / max(np.max(np.abs(Jx)), 1e-300))


# -- pseudodual model ----------------------------------------------------------------


def pseudodual_residual(phi: np.ndarray, ht: float, hx: float, accuracy: int = 4) -> np.ndarray:
    """phi_tt - phi_xx + [phi_x, phi_t] for a matrix field indexed (t, x, i, j)."""
    phi = np.asarray(phi)
    pt = numgrid.derivative(phi, 0, ht, numgrid.DECAYING, 1, accuracy)
    px = numgrid.derivative(phi, 1, hx, numgrid.DECAYING, 1, accuracy)
    ptt = numgrid.derivative(phi, 0, ht, numgrid.DECAYING, 2, accuracy)
    pxx = numgrid.derivative(phi, 1, hx, numgrid.DECAYING, 2, accuracy)
    return ptt - pxx + commutator(px, pt)


# -- 3D model (check only) -----------------------------------------------------------------


def chiral3d_calculus(shape: tuple[int, int], N: int, dx: float, dy: float,
                      boundary: str = numgrid.DECAYING, accuracy: int = 4) -> BiComplexSpec:
    """Generators (delta t, delta y): delta f = f_t dt + f_y dy, d f = f_x dt + f_t dy on one (x, y) slice."""
    alg = JetAlgebra(tuple(shape), N, {"x": (0, dx, boundary), "y": (1, dy, boundary)}, ("t", "y"))
    Dt, Dx, Dy = alg.derivation("t", accuracy), alg.derivation("x", accuracy), alg.derivation("y", accuracy)
    return BiComplexSpec(alg, M=(Dx, Dt), N=(Dt, Dy), names=("dt", "dy"))


def chiral3d_slice_tower(a, b, dx, dy, M, boundary=numgrid.DECAYING, accuracy=4) -> Tower:
    """a = g^-1 g_t and b = g^-1 g_x on an (x, y) slice; A = b dt + a dy."""
    spec = chiral3d_calculus(a.shape[:2], a.shape[-1], dx, dy, boundary, accuracy)
    g = GaugedBiComplex(spec, A=spec.one_form([Jet(np.asarray(b)), Jet(np.asarray(a))]))
    prim = line_primitive(spec, 1, "y", "t", 1, dy, boundary)
    return build_tower(g, spec.function(spec.algebra.one()), prim, M)


def chiral3d_charges(a: np.ndarray, b: np.ndarray, dx: float, dy: float, M: int = 2,
                     boundary: str = numgrid.DECAYING, accuracy: int = 4):
    """Charges from the tower on every slice of (T, nx, ny, N, N) arrays, plus the closed-form Q^(2)."""
    Qs, closed = [], []
    for i in range(a.shape[0]):
        tw = chiral3d_slice_tower(a[i], b[i], dx, dy, M, boundary, accuracy)
        qs = []
        for J in tw.currents:
            comp = J.component((1,)).value if (1,) in J.terms else np.zeros_like(a[i])
            qs.append(numgrid.trapezoid(numgrid.trapezoid(comp, 1, dy, boundary), 0, dx, boundary))
        Qs.append(qs)
        inner = numgrid.cumulative(a[i], 1, dy, boundary)
        dens = b[i] + a[i] @ inner
        closed.append(numgrid.trapezoid(numgrid.trapezoid(dens, 1, dy, boundary), 0, dx, boundary))
    return ChargeSeries(np.arange(a.shape[0], dtype=float), np.array(Qs), np.array(closed))


def chiral3d_residual(g: np.ndarray, ht: float, hx: float, hy: float, boundary=numgrid.DECAYING,
                      accuracy: int = 4) -> np.ndarray:
    """(g^-1 g_t)_t - (g^-1 g_x)_y for g indexed (t, x, y, i, j)."""
    a = maurer_cartan(g, 0, ht, numgrid.DECAYING, accuracy)
    b = maurer_cartan(g, 1, hx, boundary, accuracy)
    return numgrid.derivative(a, 0, ht, numgrid.DECAYING, 1, accuracy) - numgrid.derivative(b, 2, hy, boundary, 1, accuracy)


def abelian3d_example(nt=5, nx=64, ny=48, ht=0.1, L=6.0, Ly=4.0):
    """y-independent exact solution g = exp(i(c(x) t + e(x))) with Gaussian c and e.

    Returns (t, x, y, g, a, b) with a = g^-1 g_t and b = g^-1 g_x in closed form.
    """
    t = ht * np.arange(nt)
    x = np.linspace(-L, L, nx)
    y = np.linspace(-Ly, Ly, ny)
    T, X, Y = np.meshgrid(t, x, y, indexing="ij")
    c = 0.8 * np.exp(-X**2)
    e = 0.5 * np.exp(-(X / 1.5) ** 2)
    cp = -2 * X * c
    ep = -2 * X / 1.5**2 * e
    phase = c * T + e
    g = np.exp(1j * phase)[..., None, None]
    a = (1j * c)[..., None, None]
    b = (1j * (cp * T + ep))[..., None, None]
    return t, x, y, g, a, b


def su2_run(n: int = 512, t_end: float = 5.0, cfl: float = 0.25, record_every: int = 1,
            **pulse) -> ChiralTrajectory:
    """Evolve the SU(2) pulse to ``t_end`` with dt = cfl * dx."""
    x, g0, a0 = su2_pulse(n, **pulse)
    dx = float(x[1] - x[0])
    steps = max(1, int(round(t_end / (cfl * dx))))
    return chiral_integrate(g0, a0, dx, t_end / steps, steps, record_every=record_every)
