"""Generalized self-dual Yang-Mills equations in 2n dimensions and the Yang form in four.

Curvature 2-forms are stored by blocks: ``U[mu, nu]`` (unbarred pairs),
``Ub[mu, nu]`` (barred pairs) and ``M[mu, nu]`` for dx^mu dxbar^nu.  Entries may
carry trailing axes (grid points, matrix indices).  The star operator negates the
unmixed blocks and sends the mixed block to kappa_inv^T M^T kappa, with
kappa[mu, nu] = kappa^mu_nubar and kappa_inv[nu, mu] = kappa^nubar_mu.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .. import numgrid
from ..errors import NumericFailure, PrimitiveFailure


@dataclass(frozen=True)
class KappaMap:
    kappa: np.ndarray
    kappa_inv: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.kappa)
        ki = np.asarray(self.kappa_inv)
        if k.ndim != 2 or k.shape[0] != k.shape[1] or ki.shape != k.shape:
            raise ValueError("kappa must be a square matrix with an inverse of the same shape")
        prod = k.dot(ki)
        err = np.max(np.abs((prod - np.eye(k.shape[0])).astype(float)))
        if err > 1e-12:
            raise ValueError(f"kappa_inv is not the inverse of kappa (error {err:.3g})")
        object.__setattr__(self, "kappa", k)
        object.__setattr__(self, "kappa_inv", ki)

    @classmethod
    def of(cls, kappa) -> "KappaMap":
        k = np.asarray(kappa, float)
        return cls(k, np.linalg.inv(k))

    @classmethod
    def identity(cls, n: int) -> "KappaMap":
        return cls(np.eye(n), np.eye(n))

    @property
    def n(self) -> int:
        return self.kappa.shape[0]


@dataclass(frozen=True)
class Curvature:
    U: np.ndarray
    Ub: np.ndarray
    M: np.ndarray

    def __post_init__(self):
        n = self.M.shape[0]
        for name in ("U", "Ub", "M"):
            a = getattr(self, name)
            if a.shape[:2] != (n, n) or a.shape != self.M.shape:
                raise ValueError(f"block {name} has shape {a.shape}, expected {(n, n) + self.M.shape[2:]}")

    def __sub__(self, other: "Curvature") -> "Curvature":
        return Curvature(self.U - other.U, self.Ub - other.Ub, self.M - other.M)

    def sup(self) -> float:
        return float(max(np.max(np.abs(b.astype(complex))) if b.size else 0.0 for b in (self.U, self.Ub, self.M)))


def star2(F: Curvature, k: KappaMap) -> Curvature:
    """The self-duality star on 2-forms in block form."""
    if F.M.shape[0] != k.n:
        raise ValueError(f"curvature has n = {F.M.shape[0]} but kappa has n = {k.n}")
    # (star M)[r, s] = sum_{m, v} kappa_inv[v, r] M[m, v] kappa[m, s]
    Ms = np.einsum("vr,mv...,ms->rs...", k.kappa_inv, F.M, k.kappa)
    return Curvature(-F.U, -F.Ub, Ms)


@dataclass(frozen=True)
class SelfDualReport:
    unmixed_res: float
    mixed_sym_res: float
    selfdual_res: float
    equiv_gap: float

    def to_json(self) -> dict:
        return {"unmixed_res": self.unmixed_res, "mixed_sym_res": self.mixed_sym_res,
                "selfdual_res": self.selfdual_res, "equiv_gap": self.equiv_gap}


def _sup(a):
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def sdym_residual(F: Curvature, k: KappaMap) -> SelfDualReport:
    """Residual of F = star F both directly and in component form.

    With S = M kappa_inv the mixed part of F - star F equals (S - S^T) kappa and the
    unmixed part equals 2 U, 2 Ub; ``equiv_gap`` is the sup deviation from that map.
    """
    D = F - star2(F, k)
    S = np.einsum("mr...,rn->mn...", F.M, k.kappa_inv)
    A = S - np.swapaxes(S, 0, 1)
    predicted = np.einsum("mr...,rs->ms...", A, k.kappa)
    gap = max(_sup(D.U - 2 * F.U), _sup(D.Ub - 2 * F.Ub), _sup(D.M - predicted))
    unmixed = max(_sup(F.U), _sup(F.Ub))
    return SelfDualReport(unmixed, _sup(A), D.sup(), gap)


def random_curvature(rng: np.random.Generator, n: int, N: int = 1, selfdual: bool = False,
                     k: KappaMap | None = None) -> Curvature:
    """Random blocks with N x N complex entries; ``selfdual`` builds U = Ub = 0 and M = S kappa, S symmetric."""
    shape = (n, n, N, N)
    c = lambda: rng.normal(size=shape) + 1j * rng.normal(size=shape)
    if selfdual:
        if k is None:
            raise ValueError("a kappa map is needed for self-dual draws")
        S = c()
        S = S + np.swapaxes(S, 0, 1)
        M = np.einsum("mr...,rs->ms...", S, k.kappa)
        z = np.zeros(shape, complex)
        return Curvature(z, z.copy(), M)
    U = c()
    Ub = c()
    return Curvature(U - np.swapaxes(U, 0, 1), Ub - np.swapaxes(Ub, 0, 1), c())


# -- potentials on a 2n-dimensional grid ---------------------------------------------


@dataclass(frozen=True)
class GaugePotential2n:
    """A[mu] and B[mubar] as matrix fields on a grid with axes x^1..x^n, xbar^1..xbar^n."""

    grid: numgrid.Grid
    A: np.ndarray      # (n, *grid.shape, N, N)
    B: np.ndarray

    def __post_init__(self):
        n2 = self.grid.ndim
        if n2 % 2 or self.A.shape[0] != n2 // 2 or self.B.shape != self.A.shape:
            raise ValueError("need n components of A and B on a 2n-dimensional grid")
        if self.A.shape[1:1 + n2] != self.grid.shape:
            raise ValueError("potential does not match the grid")
        if not (np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.B))):
            raise NumericFailure("non-finite gauge potential")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def components(self) -> np.ndarray:
        return np.concatenate([self.A, self.B], axis=0)


def curvature(pot: GaugePotential2n, accuracy: int = 4) -> Curvature:
    """F_ab = d_a A_b - d_b A_a + [A_a, A_b] over the combined index a = (mu, mubar)."""
    C = pot.components()
    n = pot.n
    axes = pot.grid.axes
    d = [[numgrid.derivative(C[b], a, axes[a].step, axes[a].boundary, 1, accuracy) for b in range(2 * n)]
         for a in range(2 * n)]
    F = np.empty((2 * n, 2 * n) + C.shape[1:], dtype=complex)
    for a in range(2 * n):
        for b in range(2 * n):
            F[a, b] = d[a][b] - d[b][a] + C[a] @ C[b] - C[b] @ C[a]
    return Curvature(F[:n, :n], F[n:, n:], F[:n, n:])


def pure_gauge(grid: numgrid.Grid, g: np.ndarray, accuracy: int = 4) -> GaugePotential2n:
    """A_hat = g^-1 d_hat g by finite differences."""
    n = grid.ndim // 2
    gi = np.linalg.inv(g)
    comps = [gi @ numgrid.derivative(g, a, grid.axes[a].step, grid.axes[a].boundary, 1, accuracy)
             for a in range(2 * n)]
    return GaugePotential2n(grid, np.array(comps[:n]), np.array(comps[n:]))


@dataclass(frozen=True)
class PrimitiveReport:
    closure_res: float       # sup |d_a J_b - d_b J_a| over the integrated axes
    primitive_res: float     # sup |d_a chi - J_a|

    def to_json(self) -> dict:
        return {"closure_res": self.closure_res, "primitive_res": self.primitive_res}


def line_primitive(J: np.ndarray, grid: numgrid.Grid, axes=None, tol: float = 1e-6, level: int = 0,
                   accuracy: int = 4) -> tuple[np.ndarray, PrimitiveReport]:
    """chi with d_a chi = J_a along ``axes`` (default x^1..x^n), zero at the first grid point.

    Component a is integrated along its axis on the hyperplane where the later axes sit
    at their first grid point.  The construction assumes J is closed; the closure and
    primitive residuals are returned, and a closure residual above ``tol`` raises
    :class:`PrimitiveFailure` instead of returning a primitive of an inexact current.
    """
    axes = list(range(grid.ndim // 2) if axes is None else axes)
    J = np.asarray(J)
    if J.shape[0] != len(axes) or J.shape[1:1 + grid.ndim] != grid.shape:
        raise ValueError("need one current component per integrated axis, sampled on the grid")
    ax = grid.axes
    d = lambda f, a: numgrid.derivative(f, a, ax[a].step, ax[a].boundary, 1, accuracy)
    closure = 0.0
    for i, a in enumerate(axes):
        for j in range(i + 1, len(axes)):
            closure = max(closure, _sup(d(J[j], a) - d(J[i], axes[j])))
    if closure > tol:
        raise PrimitiveFailure(level, "current is not closed", closure)
    chi = np.zeros(J.shape[1:], dtype=J.dtype)
    for i, a in enumerate(axes):
        idx = [slice(None)] * J[i].ndim
        for b in axes[i + 1:]:
            idx[b] = slice(0, 1)
        part = numgrid.cumulative(J[i][tuple(idx)], a, ax[a].step, ax[a].boundary)
        chi = chi + part
    prim = max(_sup(d(chi, a) - J[i]) for i, a in enumerate(axes))
    return chi, PrimitiveReport(closure, prim)


def abelian_gauge_B_away(pot: GaugePotential2n) -> GaugePotential2n:
    """For pure-gauge abelian B = dbar(l): subtract d_hat(l), with l integrated along the barred axes.

    l is built by integrating B_1bar along xbar^1 from the first grid point, then each
    further B_kbar along xbar^k on the hyperplane where the earlier barred coordinates
    take their first value.
    """
    if pot.A.shape[-1] != 1:
        raise ValueError("the B = 0 gauge is implemented for the abelian case only")
    n = pot.n
    axes = pot.grid.axes
    lam = np.zeros(pot.grid.shape, complex)
    for k in range(n):
        ax = n + k
        Bk = pot.B[k][..., 0, 0]
        idx = [slice(None)] * pot.grid.ndim
        for j in range(k):
            idx[n + j] = slice(0, 1)
        lam = lam + numgrid.cumulative(Bk[tuple(idx)], ax, axes[ax].step, axes[ax].boundary)
    dl = [numgrid.derivative(lam, a, axes[a].step, axes[a].boundary, 1, 4)[..., None, None]
          for a in range(2 * n)]
    return GaugePotential2n(pot.grid, pot.A - np.array(dl[:n]), pot.B - np.array(dl[n:]))


# -- Yang form in four dimensions ----------------------------------------------------------


def _wirtinger(f, re_axis, im_axis, h_re, h_im, conj: bool, boundary, accuracy):
    fr = numgrid.derivative(f, re_axis, h_re, boundary, 1, accuracy)
    fi = numgrid.derivative(f, im_axis, h_im, boundary, 1, accuracy)
    return 0.5 * (fr + 1j * fi) if conj else 0.5 * (fr - 1j * fi)


def yang_residual(g: np.ndarray, h: tuple, boundary: str = numgrid.DECAYING, accuracy: int = 4,
                  det_min: float = 1e-8) -> np.ndarray:
    """(g^-1 g_y)_ybar + (g^-1 g_z)_zbar for g indexed (y1, y2, z1, z2, i, j) with y = y1 + i y2."""
    g = np.asarray(g, complex)
    det = np.abs(np.linalg.det(g))
    if np.any(det < det_min):
        loc = tuple(int(i) for i in np.argwhere(det < det_min)[0])
        raise NumericFailure(f"g is singular at grid index {loc}")
    gi = np.linalg.inv(g)
    hy1, hy2, hz1, hz2 = h
    Ay = gi @ _wirtinger(g, 0, 1, hy1, hy2, False, boundary, accuracy)
    Az = gi @ _wirtinger(g, 2, 3, hz1, hz2, False, boundary, accuracy)
    return _wirtinger(Ay, 0, 1, hy1, hy2, True, boundary, accuracy) + \
        _wirtinger(Az, 2, 3, hz1, hz2, True, boundary, accuracy)


def harmonic_example(n: int = 17, half_width: float = 0.5):
    """N = 1 field g = exp(|y|^2 - |z|^2) on a 4-cube; returns (g, steps)."""
    c = np.linspace(-half_width, half_width, n)
    Y1, Y2, Z1, Z2 = np.meshgrid(c, c, c, c, indexing="ij")
    hfun = Y1**2 + Y2**2 - Z1**2 - Z2**2
    step = float(c[1] - c[0])
    return np.exp(hfun)[..., None, None].astype(complex), (step,) * 4


def equivalence_sweep(draws: int = 1000, n: int = 2, N: int = 2, seed: int = 0) -> dict:
    """Star involution, equivalence gap and self-dual recognition over random draws.

    ``unmixed_res``, ``mixed_sym_res`` and ``selfdual_res`` are the worst values over
    the self-dual draws, each relative to the size of the draw.
    """
    rng = np.random.default_rng(seed)
    worst_gap = 0.0
    worst_inv = 0.0
    sd = np.zeros(3)
    iff_ok = True
    for i in range(draws):
        kappa = KappaMap.of(rng.normal(size=(n, n)) + 2 * np.eye(n))
        F = random_curvature(rng, n, N)
        r = sdym_residual(F, kappa)
        worst_gap = max(worst_gap, r.equiv_gap / max(1.0, r.selfdual_res))
        worst_inv = max(worst_inv, (star2(star2(F, kappa), kappa) - F).sup() / max(1.0, F.sup()))
        Fs = random_curvature(rng, n, N, selfdual=True, k=kappa)
        rs = sdym_residual(Fs, kappa)
        scale = max(1.0, Fs.sup())
        sd = np.maximum(sd, np.array([rs.unmixed_res, rs.mixed_sym_res, rs.selfdual_res]) / scale)
        if not (rs.selfdual_res <= 1e-12 * scale and rs.mixed_sym_res <= 1e-12 * scale
                and rs.unmixed_res == 0.0):
            iff_ok = False
        if r.selfdual_res == 0.0 or r.mixed_sym_res == 0.0:
            iff_ok = False
    return {"draws": draws, "unmixed_res": float(sd[0]), "mixed_sym_res": float(sd[1]),
            "selfdual_res": float(sd[2]), "equiv_gap": worst_gap, "star_star_float": worst_inv, "iff": iff_ok}


def exact_involution_residual(draws: int = 100, n: int = 2, seed: int = 0) -> float:
    """Max |star star F - F| for rational kappa and rational F, computed in exact arithmetic."""
    rng = np.random.default_rng(seed)
    worst = 0
    for _ in range(draws):
        while True:
            k = rng.integers(-3, 4, size=(n, n))
            det = round(np.linalg.det(k))
            if det != 0:
                break
        kf = np.array([[Fraction(int(v)) for v in row] for row in k], dtype=object)
        kinv = _rational_inverse(kf)
        kappa = KappaMap(kf, kinv)
        blocks = [np.array([[Fraction(int(v), int(d)) for v, d in zip(r1, r2)]
                            for r1, r2 in zip(rng.integers(-9, 10, size=(n, n)), rng.integers(1, 7, size=(n, n)))],
                           dtype=object) for _ in range(3)]
        U, Ub = blocks[0] - blocks[0].T, blocks[1] - blocks[1].T
        F = Curvature(U, Ub, blocks[2])
        back = star2(star2(F, kappa), kappa)
        diffs = [abs(x) for b1, b2 in ((back.U, F.U), (back.Ub, F.Ub), (back.M, F.M)) for x in (b1 - b2).ravel()]
        worst = max([worst] + diffs)
    return float(worst)


def _rational_inverse(a: np.ndarray) -> np.ndarray:
    """Gauss-Jordan inverse of a square matrix of Fractions."""
    n = a.shape[0]
    m = [list(a[i]) + [Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    for c in range(n):
        piv = next(r for r in range(c, n) if m[r][c] != 0)
        m[c], m[piv] = m[piv], m[c]
        pv = m[c][c]
        m[c] = [x / pv for x in m[c]]
        for r in range(n):
            if r != c and m[r][c] != 0:
                f = m[r][c]
                m[r] = [x - f * y for x, y in zip(m[r], m[c])]
    return np.array([row[n:] for row in m], dtype=object)
