"""Toda lattice: dynamics, the chi-tilde recursion, conserved charges and lattice calculi.

Lattice windows use the constant-ghost convention: q is continued by its edge
values outside ``[k_min, k_max]``, so the bond variables ``X_k = exp(q_{k-1} - q_k)``
equal 1 on both ghost bonds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import numgrid
from ..algebra import BiComplexSpec, DeltaPrimitive, GaugedBiComplex, GradedElement
from ..coefficients import ShiftAlgebra, ShiftPoly
from ..errors import NumericFailure

EDGE_WARN = 1e-8


@dataclass(frozen=True)
class TodaState:
    q: np.ndarray
    p: np.ndarray
    k_min: int = 0

    def __post_init__(self):
        q = np.asarray(self.q, float)
        p = np.asarray(self.p, float)
        if q.shape != p.shape or q.ndim != 1:
            raise ValueError("q and p must be 1-D arrays of equal length")
        if q.size < 3:
            raise ValueError("a Toda window needs at least 3 sites")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise NumericFailure("non-finite Toda state")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def sites(self) -> np.ndarray:
        return self.k_min + np.arange(self.q.size)

    @property
    def k_max(self) -> int:
        return self.k_min + self.q.size - 1


def bonds(q: np.ndarray) -> np.ndarray:
    """X_k = exp(q_{k-1} - q_k) for every window site k, with the left ghost bond X_{k_min} = 1.

    Works along the last axis, so time series of states are accepted.
    """
    q = np.asarray(q, float)
    r = np.zeros_like(q)
    r[..., 1:] = q[..., :-1] - q[..., 1:]
    with np.errstate(over="raise", invalid="raise"):
        try:
            return np.exp(r)
        except FloatingPointError as exc:
            raise NumericFailure("overflow in Toda bond exponentials") from exc


def toda_rhs(q) -> np.ndarray:
    """Accelerations X_k - X_{k+1}; the right ghost bond contributes 1."""
    if isinstance(q, TodaState):
        q = q.q
    X = bonds(q)
    Xnext = np.concatenate([X[..., 1:], np.ones_like(X[..., :1])], axis=-1)
    return X - Xnext


def hamiltonian(q, p) -> float:
    """Energy conserved exactly by ``toda_rhs``: kinetic plus sum over interior bonds of e^r - 1 - r.

    The linear term telescopes to q_{k_min} - q_{k_max}; it is what makes the force
    of the constant-ghost window an exact gradient.
    """
    q = np.asarray(q, float)
    r = q[:-1] - q[1:]
    return float(0.5 * np.sum(np.asarray(p) ** 2) + np.sum(np.expm1(r) - r))


def energy_closed_form(q, p) -> float:
    """(1/2) sum p^2 + sum (X_k - 1), the energy written in terms of the bonds."""
    return float(0.5 * np.sum(np.asarray(p) ** 2) + np.sum(bonds(q) - 1.0))


def gaussian_pulse(sites: int = 64, amplitude: float = 1.0, center: float | None = None,
                   width: float = 3.0, k_min: int = 0) -> TodaState:
    """q = 0 with a velocity pulse p_k = a exp(-(k - k0)^2 / w^2)."""
    k = k_min + np.arange(sites)
    k0 = k_min + (sites - 1) / 2 if center is None else center
    return TodaState(np.zeros(sites), amplitude * np.exp(-((k - k0) ** 2) / width**2), k_min)


def soliton(sites: int, kappa: float, t: float, k_min: int = 0, offset: float = 0.0):
    """Exact one-soliton q_k = log(tau_{k-1}/tau_k), tau_k = 1 + exp(2(kappa (k - offset) - sinh(kappa) t))."""
    k = k_min + np.arange(sites)
    s = np.sinh(kappa)

    def logtau(kk):
        return np.logaddexp(0.0, 2 * (kappa * (kk - offset) - s * t))

    def dlogtau(kk):
        z = 2 * (kappa * (kk - offset) - s * t)
        return -2 * s / (1 + np.exp(-z))

    q = logtau(k - 1) - logtau(k)
    p = dlogtau(k - 1) - dlogtau(k)
    return q, p


@dataclass(frozen=True)
class TodaTrajectory:
    times: np.ndarray
    q: np.ndarray
    p: np.ndarray
    k_min: int = 0

    def state(self, i: int) -> TodaState:
        return TodaState(self.q[i], self.p[i], self.k_min)


def integrate_toda(s: TodaState, dt: float, steps: int, record_every: int = 1) -> TodaTrajectory:
    """Velocity-Verlet on ``toda_rhs``; records every ``record_every`` steps (and the last)."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if steps < 0 or record_every < 1:
        raise ValueError("steps must be >= 0 and record_every >= 1")
    q, p = s.q.copy(), s.p.copy()
    f = toda_rhs(q)
    ts, qs, ps = [0.0], [q.copy()], [p.copy()]
    for n in range(1, steps + 1):
        q, p, f = numgrid.verlet_step(q, p, toda_rhs, dt, f)
        if n % record_every == 0 or n == steps:
            ts.append(n * dt)
            qs.append(q.copy())
            ps.append(p.copy())
    return TodaTrajectory(np.array(ts), np.array(qs), np.array(ps), s.k_min)


def _summands(p, X, prev1, prev2):
    """-p_j chi1_j + chi2_j - X_j chi2_{j-1} on window sites (left ghost chi2_{k_min-1} = chi2_{k_min})."""
    ghost = np.concatenate([prev2[..., :1], prev2[..., :-1]], axis=-1)
    return -p * prev1 + prev2 - X * ghost


def toda_chi(q, p, M: int) -> np.ndarray:
    """chi-tilde table, shape (M+1, ..., n+1); the last site index n stands for k -> +infinity.

    chi^(m)_k is the partial sum of its summands over sites j < k, starting at k_min.
    Leading axes of ``q`` and ``p`` (for example time) are carried along.
    """
    if M < 0:
        raise ValueError("M must be non-negative")
    q = np.asarray(q, float)
    p = np.asarray(p, float)
    X = bonds(q)
    shape = q.shape[:-1] + (q.shape[-1] + 1,)
    chis = [np.ones(shape)]

    def excl_cumsum(s):
        out = np.zeros(shape)
        out[..., 1:] = np.cumsum(s, axis=-1)
        return out

    if M >= 1:
        chis.append(excl_cumsum(-p))
    for m in range(2, M + 1):
        s = _summands(p, X, chis[m - 1][..., :-1], chis[m - 2][..., :-1])
        chis.append(excl_cumsum(s))
    return np.array(chis)


def edge_warning(q, p, tol: float = EDGE_WARN) -> bool:
    """True if the window edges are not quiescent (|p| or |X - 1| above ``tol``)."""
    X = bonds(q)
    edge = max(abs(p[0]), abs(p[-1]), abs(X[1] - 1), abs(X[-1] - 1))
    return bool(edge > tol)


@dataclass(frozen=True)
class TodaChargeSeries:
    times: np.ndarray
    Q: np.ndarray               # shape (T, M), column m-1 is Q^(m)
    edge: np.ndarray            # shape (T, M), chi^(m) at +inf minus at k_min
    momentum: np.ndarray
    energy: np.ndarray
    cubic: np.ndarray
    warned: bool = False

    @property
    def M(self) -> int:
        return self.Q.shape[1]

    @property
    def edge_check(self) -> np.ndarray:
        return np.max(np.abs(self.Q - self.edge), axis=1)

    def drift(self, m: int) -> np.ndarray:
        """|Q^(m)(t) - Q^(m)(0)| relative to |Q^(m)(0)| (absolute when that is below 1e-12)."""
        q = self.Q[:, m - 1]
        ref = abs(q[0])
        dev = np.abs(q - q[0])
        return dev / ref if ref > 1e-12 else dev


def charges_of(q, p, M: int):
    """Sum-formula charges and edge differences for one state (or leading-axis batches)."""
    q = np.asarray(q, float)
    p = np.asarray(p, float)
    chi = toda_chi(q, p, M)
    X = bonds(q)
    Q = []
    for m in range(1, M + 1):
        prev2 = chi[m - 2][..., :-1] if m >= 2 else np.zeros_like(q)
        if m == 1:
            s = -p
        else:
            s = _summands(p, X, chi[m - 1][..., :-1], prev2)
        Q.append(np.sum(s, axis=-1))
    edge = [chi[m][..., -1] - chi[m][..., 0] for m in range(1, M + 1)]
    return np.stack(Q, axis=-1), np.stack(edge, axis=-1)


def combos(Q: np.ndarray):
    """Momentum, energy and cubic combinations from Q^(1..3) (columns of ``Q``)."""
    Q1 = Q[..., 0]
    mom = -Q1
    en = 0.5 * Q1**2 - Q[..., 1] if Q.shape[-1] >= 2 else np.full_like(Q1, np.nan)
    cub = (-Q[..., 2] + Q1 * Q[..., 1] - Q1 - Q1**3 / 3) if Q.shape[-1] >= 3 else np.full_like(Q1, np.nan)
    return mom, en, cub


def closed_forms(q, p):
    """Direct evaluation of momentum, energy and the cubic density sum on a window.

    The term p_k X_{k+1} runs over k < k_max: the window charges only see bonds
    inside the window plus the left ghost bond.
    """
    q = np.asarray(q, float)
    p = np.asarray(p, float)
    X = bonds(q)
    mom = np.sum(p, axis=-1)
    en = 0.5 * np.sum(p**2, axis=-1) + np.sum(X - 1, axis=-1)
    cub = np.sum(p**3 / 3 + p * X, axis=-1) + np.sum(p[..., :-1] * X[..., 1:], axis=-1)
    return mom, en, cub


def toda_charges(traj: TodaTrajectory, M: int = 3) -> TodaChargeSeries:
    if traj.times.size == 0:
        raise ValueError("empty trajectory")
    if M < 1:
        raise ValueError("M must be at least 1")
    Q, edge = charges_of(traj.q, traj.p, M)
    mom, en, cub = combos(Q) if M >= 1 else (None, None, None)
    warned = any(edge_warning(traj.q[i], traj.p[i]) for i in (0, -1))
    return TodaChargeSeries(traj.times, Q, edge, mom, en, cub, warned)


# -- residual checkers for the lattice field equations ------------------------------


def _dt(f, h, axis=0, acc=2):
    return numgrid.derivative(f, axis, h, numgrid.DECAYING, 1, acc)


def toda_field_residual(q: np.ndarray, ht: float, hx: float, accuracy: int = 2) -> np.ndarray:
    """q_tx - (e^{q_k - q_{k+1}} - e^{q_{k-1} - q_k}) on an array indexed (t, x, k)."""
    q = np.asarray(q, float)
    qtx = _dt(_dt(q, ht, 0, accuracy), hx, 1, accuracy)
    up = numgrid.shift_array(q, 2, 1)
    dn = numgrid.shift_array(q, 2, -1)
    return qtx - (np.exp(q - up) - np.exp(dn - q))


def hik_residual(u: np.ndarray, ht: float, hx: float, accuracy: int = 2) -> np.ndarray:
    """u_tx + (1 + u_t) (S u + S^-1 u - 2u) on an array indexed (t, x, k)."""
    u = np.asarray(u, float)
    ut = _dt(u, ht, 0, accuracy)
    utx = _dt(ut, hx, 1, accuracy)
    lap = numgrid.shift_array(u, 2, 1) + numgrid.shift_array(u, 2, -1) - 2 * u
    return utx + (1 + ut) * lap


def nonabelian_toda_residual(X: np.ndarray, Y: np.ndarray, ht: float, hx: float, accuracy: int = 2):
    """(X' - (Y_k - Y_{k-1}), Y_t - (Y_k X_{k+1} - X_k Y_k)) for matrix fields indexed (t, x, k, i, j)."""
    X = np.asarray(X)
    Y = np.asarray(Y)
    Xx = _dt(X, hx, 1, accuracy)
    Yt = _dt(Y, ht, 0, accuracy)
    r1 = Xx - (Y - numgrid.shift_array(Y, 2, -1))
    r2 = Yt - (Y @ numgrid.shift_array(X, 2, 1) - X @ Y)
    return r1, r2


# -- bi-differential calculi over shift-operator coefficients -----------------------


def toda_calculus(shape, ht: float, boundary: str = numgrid.DECAYING, accuracy: int = 2,
                  tol: float = 1e-10, trim: int = 0) -> BiComplexSpec:
    """Generators (delta t, xi): delta f = f_t dt + [S, f] xi, d f = [S^-1, f] dt - f_t xi.

    Coefficient arrays are indexed (t, k); ``trim`` time slices at each end are
    left out of residual norms.
    """
    alg = ShiftAlgebra(tuple(shape), k_axis=1, boundary=boundary, trim=trim)
    Dt = alg.partial(0, ht, numgrid.DECAYING, accuracy)
    mDt = alg.partial(0, ht, numgrid.DECAYING, accuracy, scale=-1.0)
    return BiComplexSpec(alg, M=(alg.ad_shift(-1), mDt), N=(Dt, alg.ad_shift(1)), tol=tol,
                         names=("dt", "xi"))


def toda_field_calculus(shape, ht: float, hx: float, boundary: str = numgrid.DECAYING,
                        accuracy: int = 2, tol: float = 1e-10) -> BiComplexSpec:
    """delta f = f_t dt + [S, f] xi, d f = [S^-1, f] dt + f_x xi on arrays indexed (t, x, k)."""
    alg = ShiftAlgebra(tuple(shape), k_axis=2, boundary=boundary)
    Dt = alg.partial(0, ht, numgrid.DECAYING, accuracy)
    Dx = alg.partial(1, hx, numgrid.DECAYING, accuracy)
    return BiComplexSpec(alg, M=(alg.ad_shift(-1), Dx), N=(Dt, alg.ad_shift(1)), tol=tol,
                         names=("dt", "xi"))


def nonabelian_calculus(shape, n: int, ht: float, hx: float, boundary: str = numgrid.DECAYING,
                        accuracy: int = 2, tol: float = 1e-10) -> BiComplexSpec:
    """delta f = [S^-1, f] tau - f_x xi, d f = f_t tau + [S, f] xi; matrix arrays (t, x, k, i, j)."""
    alg = ShiftAlgebra(tuple(shape), k_axis=2, boundary=boundary, n=n)
    Dt = alg.partial(0, ht, numgrid.DECAYING, accuracy)
    mDx = alg.partial(1, hx, numgrid.DECAYING, accuracy, scale=-1.0)
    return BiComplexSpec(alg, M=(Dt, alg.ad_shift(1)), N=(alg.ad_shift(-1), mDx), tol=tol,
                         names=("tau", "xi"))


def toda_gauge(spec: BiComplexSpec, q: np.ndarray, p: np.ndarray) -> GaugedBiComplex:
    """A = (X_k - 1) S^-1 dt - p_k xi with B = 0, for arrays indexed (t, k)."""
    alg = spec.algebra
    X = bonds(q)
    A = spec.one_form([alg.monomial(X - 1.0, -1), alg.function(-np.asarray(p, float))])
    return GaugedBiComplex(spec, A=A)


def toda_primitive(spec: BiComplexSpec) -> DeltaPrimitive:
    """Solve delta chi = J via [S, chi] = J_xi by partial sums from the leftmost site.

    ``chi = sum_n c_n S^(n-1)`` with ``c_n`` the exclusive running sum of the S^n
    coefficient of J_xi; its t-component is then satisfied on closed currents.
    """
    alg: ShiftAlgebra = spec.algebra

    def solve(J: GradedElement) -> GradedElement:
        if J.degree != 1:
            raise ValueError("the Toda primitive inverts delta on 1-forms")
        Jxi: ShiftPoly = J.component((1,))
        terms = {}
        for n, c in Jxi.terms.items():
            cs = np.cumsum(c, axis=alg.k_axis)
            excl = numgrid.shift_array(cs, alg.k_axis, -1, numgrid.DECAYING)
            idx = [slice(None)] * excl.ndim
            idx[alg.k_axis] = 0
            excl = excl.copy()
            excl[tuple(idx)] = 0.0
            terms[n - 1] = excl
        return spec.function(alg.make(terms))

    return DeltaPrimitive(solve, base_point="leftmost lattice site")


def toda_defect(q: np.ndarray, p: np.ndarray, ht: float, accuracy: int = 2) -> np.ndarray:
    """p_t - (X_k - X_{k+1}) on a (t, k) history, with p_t by finite differences."""
    pt = numgrid.derivative(np.asarray(p, float), 0, ht, numgrid.DECAYING, 1, accuracy)
    return pt - toda_rhs(q)
