"""Sine-Gordon and Liouville Backlund pairs integrated along characteristics.

A seed solution is passed as a callable ``phi(u, v)``; its first derivatives are
taken from the optional ``phi_u``/``phi_v`` callables or by central differences
with a small step.  The first-order pair is integrated as an ODE in v along the
left edge u = u_0, then as a family of ODEs in u along every line v = const,
with classical RK4 and ``substeps`` steps per grid interval.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .. import numgrid
from ..errors import NumericFailure

DIFF_STEP = 1e-5


@dataclass(frozen=True)
class LightconeGrid:
    u0: float
    v0: float
    hu: float
    hv: float
    nu: int
    nv: int

    def __post_init__(self):
        if not (self.hu > 0 and self.hv > 0):
            raise ValueError("grid steps must be positive")
        if self.nu < 5 or self.nv < 5:
            raise ValueError("need at least 5 points per axis")

    @classmethod
    def square(cls, lo: float, hi: float, n: int) -> "LightconeGrid":
        h = (hi - lo) / (n - 1)
        return cls(lo, lo, h, h, n, n)

    @property
    def u(self) -> np.ndarray:
        return self.u0 + self.hu * np.arange(self.nu)

    @property
    def v(self) -> np.ndarray:
        return self.v0 + self.hv * np.arange(self.nv)

    def mesh(self):
        return np.meshgrid(self.u, self.v, indexing="ij")

    def grid(self) -> numgrid.Grid:
        return numgrid.Grid((numgrid.Axis("u", self.u0, self.hu, self.nu),
                             numgrid.Axis("v", self.v0, self.hv, self.nv)))


@dataclass(frozen=True)
class Seed:
    phi: Callable
    phi_u: Callable | None = None
    phi_v: Callable | None = None

    def du(self, u, v):
        if self.phi_u is not None:
            return self.phi_u(u, v)
        return (self.phi(u + DIFF_STEP, v) - self.phi(u - DIFF_STEP, v)) / (2 * DIFF_STEP)

    def dv(self, u, v):
        if self.phi_v is not None:
            return self.phi_v(u, v)
        return (self.phi(u, v + DIFF_STEP) - self.phi(u, v - DIFF_STEP)) / (2 * DIFF_STEP)


def vacuum() -> Seed:
    z = lambda u, v: np.zeros(np.broadcast(u, v).shape)
    return Seed(z, z, z)


def constant_seed(c: float) -> Seed:
    z = lambda u, v: np.zeros(np.broadcast(u, v).shape)
    return Seed(lambda u, v: np.full(np.broadcast(u, v).shape, float(c)), z, z)


# -- residuals ------------------------------------------------------------------


def _mixed(f, hu, hv, accuracy=4):
    fu = numgrid.derivative(np.asarray(f, float), 0, hu, numgrid.DECAYING, 1, accuracy)
    return numgrid.derivative(fu, 1, hv, numgrid.DECAYING, 1, accuracy)


def sg_residual(phi: np.ndarray, hu: float, hv: float, accuracy: int = 4) -> np.ndarray:
    """phi_uv - sin(phi) on a (u, v) grid."""
    return _mixed(phi, hu, hv, accuracy) - np.sin(phi)


def liouville_residual(phi: np.ndarray, hu: float, hv: float, accuracy: int = 4) -> np.ndarray:
    """phi_uv - exp(2 phi) on a (u, v) grid."""
    return _mixed(phi, hu, hv, accuracy) - np.exp(2 * np.asarray(phi, float))


def wave_residual(psi: np.ndarray, hu: float, hv: float, accuracy: int = 4) -> np.ndarray:
    return _mixed(psi, hu, hv, accuracy)


# -- characteristic integration ------------------------------------------------------


def _rk4_line(y0, f, s0, h, n, substeps):
    """Integrate y' = f(s, y) from s0 over n grid intervals of width h; returns n+1 samples."""
    out = [np.array(y0, float)]
    y = out[0].copy()
    k = h / substeps
    s = s0
    for _ in range(n):
        for _ in range(substeps):
            k1 = f(s, y)
            k2 = f(s + k / 2, y + k / 2 * k1)
            k3 = f(s + k / 2, y + k / 2 * k2)
            k4 = f(s + k, y + k * k3)
            y = y + k / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            s += k
        if not np.all(np.isfinite(y)):
            raise NumericFailure("non-finite value while integrating the Backlund pair")
        out.append(y.copy())
    return np.array(out)


@dataclass(frozen=True)
class PairSystem:
    """psi_u = fu(u, v, psi) and psi_v = fv(u, v, psi), both evaluated pointwise."""

    fu: Callable
    fv: Callable

    def integrate(self, grid: LightconeGrid, corner: float, substeps: int = 4, order: str = "vu") -> np.ndarray:
        """``order='vu'`` runs the v-ODE on u = u_0 first; ``'uv'`` runs the u-ODE on v = v_0 first."""
        g = grid
        if order == "vu":
            edge = _rk4_line(corner, lambda v, y: self.fv(g.u0, v, y), g.v0, g.hv, g.nv - 1, substeps)
            v = g.v
            return _rk4_line(edge, lambda u, y: self.fu(u, v, y), g.u0, g.hu, g.nu - 1, substeps)
        if order == "uv":
            edge = _rk4_line(corner, lambda u, y: self.fu(u, g.v0, y), g.u0, g.hu, g.nu - 1, substeps)
            u = g.u
            return _rk4_line(edge, lambda v, y: self.fv(u, v, y), g.v0, g.hv, g.nv - 1, substeps).T
        raise ValueError("order must be 'vu' or 'uv'")


def _check_lambda(lam):
    if lam == 0:
        raise ValueError("the Backlund parameter must be nonzero")


def _seed_residual(values, grid, residual, tol, name):
    r = residual(values, grid.hu, grid.hv)
    worst = float(np.max(np.abs(r)))
    if worst > tol:
        raise ValueError(f"seed does not solve the {name} equation (residual {worst:.3g} > {tol:g})")
    return worst


@dataclass(frozen=True)
class BacklundResult:
    field: np.ndarray           # psi for sine-Gordon, phi for Liouville
    cross: np.ndarray           # same field, opposite integration order
    grid: LightconeGrid
    seed_residual: float

    @property
    def cross_gap(self) -> float:
        return float(np.max(np.abs(self.field - self.cross)))


def sg_pair(seed: Seed, lam: float) -> PairSystem:
    """(psi - phi)_u = 2 lam sin((psi + phi)/2), (psi + phi)_v = (2/lam) sin((psi - phi)/2)."""
    _check_lambda(lam)
    return PairSystem(
        fu=lambda u, v, p: seed.du(u, v) + 2 * lam * np.sin((p + seed.phi(u, v)) / 2),
        fv=lambda u, v, p: -seed.dv(u, v) + (2 / lam) * np.sin((p - seed.phi(u, v)) / 2))


def sg_backlund(seed: Seed, lam: float, corner: float, grid: LightconeGrid, substeps: int = 4,
                seed_tol: float = 1e-6, cross_tol: float | None = 1e-6) -> BacklundResult:
    pair = sg_pair(seed, lam)
    U, V = grid.mesh()
    sres = _seed_residual(seed.phi(U, V), grid, sg_residual, seed_tol, "sine-Gordon")
    psi = pair.integrate(grid, corner, substeps, "vu")
    cross = pair.integrate(grid, corner, substeps, "uv")
    out = BacklundResult(psi, cross, grid, sres)
    if cross_tol is not None and out.cross_gap > cross_tol:
        raise ValueError(f"integration orders disagree by {out.cross_gap:.3g}; the seed is inconsistent")
    return out


def liouville_pair(seed: Seed, lam: float) -> PairSystem:
    """(psi + phi)_u = -lam e^{phi - psi}, (psi - phi)_v = e^{phi + psi} / lam, solved for phi."""
    _check_lambda(lam)

    def fu(u, v, f):
        with np.errstate(over="raise"):
            try:
                return -seed.du(u, v) - lam * np.exp(f - seed.phi(u, v))
            except FloatingPointError as exc:
                raise NumericFailure("exponential blowup in the Liouville pair") from exc

    def fv(u, v, f):
        with np.errstate(over="raise"):
            try:
                return seed.dv(u, v) - np.exp(f + seed.phi(u, v)) / lam
            except FloatingPointError as exc:
                raise NumericFailure("exponential blowup in the Liouville pair") from exc

    return PairSystem(fu, fv)


def liouville_backlund(seed: Seed, lam: float, corner: float, grid: LightconeGrid, substeps: int = 4,
                       seed_tol: float = 1e-6, cross_tol: float | None = 1e-6) -> BacklundResult:
    """Here ``seed`` is the free-wave field psi (psi_uv = 0) and the output is phi."""
    pair = liouville_pair(seed, lam)
    U, V = grid.mesh()
    sres = _seed_residual(seed.phi(U, V), grid, wave_residual, seed_tol, "wave")
    phi = pair.integrate(grid, corner, substeps, "vu")
    cross = pair.integrate(grid, corner, substeps, "uv")
    out = BacklundResult(phi, cross, grid, sres)
    if cross_tol is not None and out.cross_gap > cross_tol:
        raise ValueError(f"integration orders disagree by {out.cross_gap:.3g}; the seed is inconsistent")
    return out


# -- closed forms ---------------------------------------------------------------------


def kink(u, v, lam: float, c: float) -> np.ndarray:
    return 4 * np.arctan(np.exp(lam * np.asarray(u) + np.asarray(v) / lam + c))


def kink_offset(psi0: float, lam: float, u0: float, v0: float) -> float:
    """c such that the kink takes the value psi0 at (u0, v0); needs 0 < psi0 < 2 pi."""
    if not 0 < psi0 < 2 * np.pi:
        raise ValueError("a kink corner value must lie strictly between 0 and 2 pi")
    return float(np.log(np.tan(psi0 / 4)) - lam * u0 - v0 / lam)


def liouville_vacuum_solution(u, v, lam: float, phi0: float, u0: float, v0: float) -> np.ndarray:
    """Closed form for psi = 0: phi = -log(C + lam u + v / lam) with phi(u0, v0) = phi0."""
    C = np.exp(-phi0) - lam * u0 - v0 / lam
    arg = C + lam * np.asarray(u) + np.asarray(v) / lam
    return -np.log(arg)


def sg_kink_scenario(n: int = 201, half_width: float = 1.0, lam: float = 1.0, corner: float = 1.0):
    """Vacuum seed on [-w, w]^2; returns (result, closed-form kink on the grid)."""
    g = LightconeGrid.square(-half_width, half_width, n)
    res = sg_backlund(vacuum(), lam, corner, g)
    U, V = g.mesh()
    return res, kink(U, V, lam, kink_offset(corner, lam, g.u0, g.v0))


def liouville_scenario(n: int = 201, lo: float = 0.0, hi: float = 1.0, lam: float = -1.0, corner: float = -1.0):
    """psi = 0 seed; returns (result, closed form on the grid)."""
    g = LightconeGrid.square(lo, hi, n)
    res = liouville_backlund(vacuum(), lam, corner, g)
    U, V = g.mesh()
    return res, liouville_vacuum_solution(U, V, lam, corner, g.u0, g.v0)
