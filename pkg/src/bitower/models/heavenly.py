"""Generalized first heavenly equation, its Poisson bracket and the first levels of its tower.

Fields live on a grid whose first 2n axes are the coordinates x^mu and whose
last 2m axes are y^a.  The bracket is {f, g} = omega^{ab} f_a g_b and the
equation reads omega^{ab} Omega_{mu a} Omega_{nu b} = omega_tilde_{mu nu}; for
m = n = 1 on (t, x; q, p) this is Omega_xp Omega_tq - Omega_xq Omega_tp = 1.
All derivatives are finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import numgrid
from ..errors import TowerError

ROUNDOFF = 1e-10


def canonical(k: int) -> np.ndarray:
    """The 2k x 2k matrix [[0, I], [-I, 0]]."""
    z = np.zeros((k, k))
    i = np.eye(k)
    return np.block([[z, i], [-i, z]])


@dataclass(frozen=True)
class HeavenlyConfig:
    grid: numgrid.Grid
    Omega: np.ndarray = field(repr=False)
    n: int = 1
    m: int = 1
    omega: np.ndarray | None = None          # omega^{ab}, canonical by default
    omega_t: np.ndarray | None = None        # omega_tilde_{mu nu}, canonical by default
    accuracy: int = 2

    def __post_init__(self):
        if self.grid.ndim != 2 * (self.n + self.m):
            raise ValueError(f"grid must have 2n + 2m = {2 * (self.n + self.m)} axes")
        if np.shape(self.Omega) != self.grid.shape:
            raise ValueError("Omega does not match the grid")
        w = canonical(self.m) if self.omega is None else np.asarray(self.omega, float)
        wt = canonical(self.n) if self.omega_t is None else np.asarray(self.omega_t, float)
        if w.shape != (2 * self.m,) * 2 or np.any(w != -w.T):
            raise ValueError("omega must be an antisymmetric 2m x 2m matrix")
        if abs(np.linalg.det(w)) < 1e-12:
            raise ValueError("omega must be invertible")
        if wt.shape[:2] != (2 * self.n,) * 2 or np.any(wt != -np.swapaxes(wt, 0, 1)):
            raise ValueError("omega_tilde must be antisymmetric in its first two indices")
        object.__setattr__(self, "Omega", np.asarray(self.Omega, float))
        object.__setattr__(self, "omega", w)
        object.__setattr__(self, "omega_t", wt)

    @property
    def x_axes(self) -> range:
        return range(2 * self.n)

    @property
    def y_axes(self) -> range:
        return range(2 * self.n, 2 * (self.n + self.m))

    def d(self, f: np.ndarray, axis: int) -> np.ndarray:
        a = self.grid.axes[axis]
        return numgrid.derivative(f, axis, a.step, a.boundary, 1, self.accuracy)


def poisson(f: np.ndarray, g: np.ndarray, cfg: HeavenlyConfig) -> np.ndarray:
    """omega^{ab} (d_a f)(d_b g)."""
    f = np.asarray(f, float)
    g = np.asarray(g, float)
    if f.shape != cfg.grid.shape or g.shape != cfg.grid.shape:
        raise ValueError("both fields must live on the configuration grid")
    fy = [cfg.d(f, a) for a in cfg.y_axes]
    gy = fy if g is f else [cfg.d(g, a) for a in cfg.y_axes]
    out = np.zeros(cfg.grid.shape)
    for i in range(2 * cfg.m):
        for j in range(2 * cfg.m):
            if cfg.omega[i, j] != 0:
                out += cfg.omega[i, j] * fy[i] * gy[j]
    return out


def heavenly_residual(cfg: HeavenlyConfig) -> np.ndarray:
    """R[mu, nu] = {Omega_mu, Omega_nu} - omega_tilde_{mu nu}, antisymmetric by construction."""
    k = 2 * cfg.n
    Om = [cfg.d(cfg.Omega, mu) for mu in cfg.x_axes]
    wt = cfg.omega_t
    R = np.zeros((k, k) + cfg.grid.shape)
    for mu in range(k):
        for nu in range(mu + 1, k):
            R[mu, nu] = poisson(Om[mu], Om[nu], cfg) - wt[mu, nu]
            R[nu, mu] = -R[mu, nu]
    return R


def conservation_residual(J: np.ndarray, cfg: HeavenlyConfig) -> np.ndarray:
    """d_mu J_nu - d_nu J_mu for mu < nu; for n = 1 this is d_mu (eps^{mu nu} J_nu)."""
    k = 2 * cfg.n
    out = []
    for mu in range(k):
        for nu in range(mu + 1, k):
            out.append(cfg.d(J[nu], mu) - cfg.d(J[mu], nu))
    return np.array(out)


def line_primitive(J: np.ndarray, cfg: HeavenlyConfig) -> np.ndarray:
    """chi with chi(x_0, y) = 0, integrated along x^1, then x^2 on x^1 = x^1_0 fixed, and so on.

    Each component is integrated on the hyperplane where the later coordinates
    sit at their first grid point, which is exact for a closed J.
    """
    k = 2 * cfg.n
    chi = np.zeros(cfg.grid.shape)
    for mu in range(k):
        idx = [slice(None)] * cfg.grid.ndim
        for nu in range(mu + 1, k):
            idx[nu] = slice(0, 1)
        a = cfg.grid.axes[mu]
        chi = chi + numgrid.cumulative(J[mu][tuple(idx)], mu, a.step, a.boundary)
    return chi


@dataclass(frozen=True)
class HeavenlyLevel:
    m: int
    chi: np.ndarray = field(repr=False)
    J: np.ndarray = field(repr=False)      # (2n, *grid), the current that chi is a primitive of
    conservation_residual: float
    primitive_residual: float

    def to_json(self) -> dict:
        return {"m": self.m, "conservation_residual": self.conservation_residual,
                "primitive_residual": self.primitive_residual}


def core(grid: numgrid.Grid, margin: float) -> tuple:
    """Index of the points at least ``margin`` times the axis length away from every decaying edge."""
    idx = []
    for a in grid.axes:
        if a.boundary == numgrid.PERIODIC or margin <= 0:
            idx.append(np.arange(a.n))
            continue
        c = a.coords
        lo, hi = c[0] + margin * a.length, c[-1] - margin * a.length
        keep = np.flatnonzero((c >= lo - 1e-12 * a.length) & (c <= hi + 1e-12 * a.length))
        if keep.size == 0:
            raise ValueError(f"margin {margin} leaves no interior points on axis {a.name!r}")
        idx.append(keep)
    return np.ix_(*idx)


def heavenly_tower(cfg: HeavenlyConfig, chi0: np.ndarray, M: int = 2, tol: float = 1e-1,
                   seed_tol: float = 1e-10, margin: float = 0.25) -> list[HeavenlyLevel]:
    """Levels 1..M with J^(m)_mu = {chi^(m-1), Omega_mu}.

    chi^(1) = {chi^(0), Omega}; higher chi^(m) are line integrals of J^(m).  Residuals
    are sup norms over the interior :func:`core`; nested one-sided stencils lose an
    order per nesting level next to decaying edges, so the edge layer is excluded.
    Raises :class:`TowerError` if the seed depends on x^mu or the heavenly residual
    exceeds ``tol``.
    """
    inner = core(cfg.grid, margin)
    chi0 = np.broadcast_to(np.asarray(chi0, float), cfg.grid.shape)
    dep = max(float(np.max(np.abs(cfg.d(chi0, mu)))) for mu in cfg.x_axes)
    if dep > seed_tol:
        raise TowerError(0, "seed depends on the x coordinates", dep)
    res = float(np.max(np.abs(heavenly_residual(cfg))))
    if res > tol:
        raise TowerError(0, "Omega does not solve the heavenly equation", res)
    Om = [cfg.d(cfg.Omega, mu) for mu in cfg.x_axes]
    levels = []
    prev = chi0
    for m in range(1, M + 1):
        J = np.array([poisson(prev, o, cfg) for o in Om])
        cons = float(np.max(np.abs(conservation_residual(J, cfg)[(slice(None),) + inner])))
        chi = poisson(chi0, cfg.Omega, cfg) if m == 1 else line_primitive(J, cfg)
        dchi = np.array([cfg.d(chi, mu) for mu in cfg.x_axes])
        prim = float(np.max(np.abs((dchi - J)[(slice(None),) + inner])))
        levels.append(HeavenlyLevel(m, chi, J, cons, prim))
        prev = chi
    return levels


# -- exact solutions --------------------------------------------------------------------


def flat_grid(n: int = 17, lo: float = -1.0, hi: float = 1.0) -> numgrid.Grid:
    step = (hi - lo) / (n - 1)
    return numgrid.Grid(tuple(numgrid.Axis(nm, lo, step, n) for nm in ("t", "x", "q", "p")))


def flat_solution(grid: numgrid.Grid) -> np.ndarray:
    t, x, q, p = grid.mesh()
    return t * q + x * p


def dressed_solution(grid: numgrid.Grid) -> np.ndarray:
    """A non-polynomial solution: the flat one plus a(T, P) + b(T, X) + G(Q, P), composed with
    area-preserving shears in (t, x) and in (q, p), both of which preserve the equation."""
    t, x, q, p = grid.mesh()
    T = t + 0.3 * np.sin(x)
    X = x + 0.2 * np.cos(T)
    Q = q + 0.3 * np.cos(p)
    P = p + 0.2 * np.sin(Q)
    return T * Q + X * P + 0.25 * np.sin(T + P) + 0.5 * T * X**2 + 0.1 * Q * P**2


def dressed_seed(grid: numgrid.Grid) -> np.ndarray:
    _, _, q, p = grid.mesh()
    return q * p + 0.5 * np.sin(q)


def refinement_study(ns=(9, 13, 17), M: int = 2, lo: float = -1.0, hi: float = 1.0) -> dict:
    """Conservation residual of levels 1..M for the dressed solution on an n^4 grid for each n.

    A level whose residual stays at roundoff on every grid is closed exactly by the
    difference scheme; its order is reported as None with ``at_roundoff`` set.
    """
    steps, res = [], {m: [] for m in range(1, M + 1)}
    prim = {m: [] for m in range(1, M + 1)}
    for n in ns:
        g = flat_grid(n, lo, hi)
        cfg = HeavenlyConfig(g, dressed_solution(g))
        steps.append(g.axes[0].step)
        for lev in heavenly_tower(cfg, dressed_seed(g), M):
            res[lev.m].append(lev.conservation_residual)
            prim[lev.m].append(lev.primitive_residual)
    levels = []
    for m in range(1, M + 1):
        flat = max(res[m]) <= ROUNDOFF
        levels.append({"m": m, "conservation_residual": res[m][-1], "primitive_residual": prim[m][-1],
                       "residuals": res[m], "at_roundoff": flat,
                       "order": None if flat else numgrid.observed_order(steps, res[m])})
    return {"steps": steps, "levels": levels}
