"""Graded algebra with two differentials, gauge covariant derivatives and the tower iterator.

Forms are left modules over a coefficient algebra with anticommuting generators
xi^1..xi^n that commute with coefficients.  A bi-differential calculus is fixed by
two families of derivations, d f = (M_mu f) xi^mu and delta f = (N_mu f) xi^mu,
extended to higher forms by d(f xi^I) = (d f) xi^I.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .coefficients import CoefficientAlgebra
from .errors import DerivativeUnavailable, PrimitiveFailure, SeedNotClosed, TowerError


def _merge_sign(a: tuple, b: tuple):
    """Sorted union of disjoint index tuples with the permutation sign, or None if they overlap."""
    if set(a) & set(b):
        return None
    inversions = sum(1 for i in a for j in b if i > j)
    return tuple(sorted(a + b)), (-1) ** inversions


@dataclass(frozen=True)
class GradedElement:
    """Homogeneous form of ``degree`` over ``algebra`` with ``n`` generators."""

    n: int
    degree: int
    algebra: CoefficientAlgebra = field(compare=False)
    terms: Mapping[tuple, object] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        clean = {}
        for idx, c in self.terms.items():
            idx = tuple(idx)
            if len(idx) != self.degree:
                raise ValueError(f"index list {idx} does not have length {self.degree}")
            if any(b <= a for a, b in zip(idx, idx[1:])):
                raise ValueError(f"index list {idx} is not strictly increasing")
            if any(not 0 <= i < self.n for i in idx):
                raise ValueError(f"generator index out of range in {idx}")
            if not self.algebra.is_zero(c):
                clean[idx] = c
        object.__setattr__(self, "terms", dict(sorted(clean.items())))

    # constructors
    @classmethod
    def zero(cls, n, degree, algebra):
        return cls(n, degree, algebra, {})

    @classmethod
    def function(cls, n, algebra, coeff):
        return cls(n, 0, algebra, {(): coeff})

    @classmethod
    def one_form(cls, n, algebra, coeffs: Sequence):
        """``sum_mu coeffs[mu] xi^mu``; ``None`` entries are skipped."""
        return cls(n, 1, algebra, {(mu,): c for mu, c in enumerate(coeffs) if c is not None})

    @classmethod
    def generator(cls, n, algebra, mu):
        return cls(n, 1, algebra, {(mu,): algebra.one()})

    def component(self, idx) -> object:
        return self.terms.get(tuple(idx), self.algebra.zero())

    @property
    def coefficient(self):
        """Coefficient of a 0-form."""
        if self.degree != 0:
            raise ValueError("only 0-forms have a single coefficient")
        return self.component(())

    def _check(self, other: "GradedElement", same_degree=True):
        if not isinstance(other, GradedElement):
            raise TypeError("expected a GradedElement")
        if other.n != self.n or other.algebra != self.algebra:
            raise ValueError(f"mismatched algebras: {self.algebra.tag}/{self.n} vs {other.algebra.tag}/{other.n}")
        if same_degree and other.degree != self.degree:
            raise ValueError(f"cannot add forms of degree {self.degree} and {other.degree}")

    def __add__(self, other):
        self._check(other)
        out = dict(self.terms)
        for idx, c in other.terms.items():
            out[idx] = self.algebra.add(out[idx], c) if idx in out else c
        return GradedElement(self.n, self.degree, self.algebra, out)

    def __neg__(self):
        return GradedElement(self.n, self.degree, self.algebra,
                             {i: self.algebra.neg(c) for i, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        return GradedElement(self.n, self.degree, self.algebra,
                             {i: self.algebra.scale(c, v) for i, v in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, GradedElement):
            return wedge(self, other)
        return self.scale(other)

    def __rmul__(self, c):
        return self.scale(c)

    def map(self, fn: Callable, degree: int | None = None) -> "GradedElement":
        return GradedElement(self.n, self.degree if degree is None else degree, self.algebra,
                             {i: fn(c) for i, c in self.terms.items()})

    def norm(self) -> float:
        return max((self.algebra.norm(c) for c in self.terms.values()), default=0.0)

    def is_zero(self) -> bool:
        return not self.terms


def wedge(a: GradedElement, b: GradedElement) -> GradedElement:
    a._check(b, same_degree=False)
    alg = a.algebra
    out: dict = {}
    for ia, fa in a.terms.items():
        for ib, fb in b.terms.items():
            merged = _merge_sign(ia, ib)
            if merged is None:
                continue
            idx, sign = merged
            t = alg.mul(fa, fb)
            if sign < 0:
                t = alg.neg(t)
            out[idx] = alg.add(out[idx], t) if idx in out else t
    return GradedElement(a.n, a.degree + b.degree, alg, out)


# -- bi-differential calculus ----------------------------------------------------


@dataclass(frozen=True)
class BiComplexSpec:
    """Derivation families ``M`` (for d) and ``N`` (for delta) on a coefficient algebra."""

    algebra: CoefficientAlgebra
    M: tuple
    N: tuple
    tol: float = 1e-10
    names: tuple = ()

    def __post_init__(self):
        if len(self.M) != len(self.N):
            raise ValueError("M and N must have the same length")
        object.__setattr__(self, "M", tuple(self.M))
        object.__setattr__(self, "N", tuple(self.N))

    @property
    def n(self) -> int:
        return len(self.M)

    def function(self, c) -> GradedElement:
        return GradedElement.function(self.n, self.algebra, c)

    def one_form(self, coeffs) -> GradedElement:
        return GradedElement.one_form(self.n, self.algebra, coeffs)


def _apply(derivs: Sequence[Callable], a: GradedElement) -> GradedElement:
    alg = a.algebra
    out: dict = {}
    for idx, f in a.terms.items():
        for mu, D in enumerate(derivs):
            if mu in idx:
                continue
            df = D(f)
            if alg.is_zero(df):
                continue
            sign = (-1) ** sum(1 for i in idx if i < mu)
            new = tuple(sorted(idx + (mu,)))
            t = df if sign > 0 else alg.neg(df)
            out[new] = alg.add(out[new], t) if new in out else t
    return GradedElement(a.n, a.degree + 1, alg, out)


def apply_d(spec: BiComplexSpec, a: GradedElement) -> GradedElement:
    _check_spec(spec, a)
    return _apply(spec.M, a)


def apply_delta(spec: BiComplexSpec, a: GradedElement) -> GradedElement:
    _check_spec(spec, a)
    return _apply(spec.N, a)


def _check_spec(spec, a):
    if a.n != spec.n or a.algebra != spec.algebra:
        raise ValueError("form does not belong to this calculus")


# -- reports --------------------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    check: str
    max_residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.max_residual) and self.max_residual <= self.tolerance)

    def to_json(self) -> dict:
        return {"check": self.check, "max_residual": self.max_residual,
                "tolerance": self.tolerance, "pass": self.passed}


@dataclass(frozen=True)
class Report:
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.check == name:
                return c
        raise KeyError(name)

    def to_json(self) -> list:
        return [c.to_json() for c in self.checks]

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


class AxiomReport(Report):
    pass


class FlatnessReport(Report):
    pass


def _sample_forms(spec: BiComplexSpec, samples: Sequence) -> list[GradedElement]:
    """0-forms from the samples plus 1- and 2-forms built by attaching generators."""
    forms = [spec.function(s) for s in samples]
    n = spec.n
    for i, s in enumerate(samples):
        forms.append(GradedElement(n, 1, spec.algebra, {(i % n,): s}))
        if n >= 2:
            forms.append(GradedElement(n, 2, spec.algebra, {(0, 1): s}))
    return forms


def check_bicomplex_axioms(spec: BiComplexSpec, samples: Sequence, tol: float | None = None,
                           leibniz: bool = True) -> AxiomReport:
    """Max residuals of d^2, delta^2, d delta + delta d and the graded Leibniz rules."""
    if not samples:
        raise ValueError("at least one sample coefficient is required")
    tol = spec.tol if tol is None else tol
    forms = _sample_forms(spec, samples)
    d = lambda w: apply_d(spec, w)
    dl = lambda w: apply_delta(spec, w)
    r_dd = max(d(d(w)).norm() for w in forms)
    r_ll = max(dl(dl(w)).norm() for w in forms)
    r_mix = max((d(dl(w)) + dl(d(w))).norm() for w in forms)
    checks = [CheckResult("d^2", r_dd, tol), CheckResult("delta^2", r_ll, tol),
              CheckResult("d delta + delta d", r_mix, tol)]
    if leibniz:
        rl_d = rl_l = 0.0
        for a in forms:
            for b in forms[: len(samples)] + forms[len(samples):: 2]:
                if a.degree + b.degree + 1 > spec.n:
                    continue
                sgn = (-1) ** a.degree
                for op, acc in ((d, "d"), (dl, "l")):
                    res = (op(wedge(a, b)) - wedge(op(a), b) - wedge(a, op(b)).scale(sgn)).norm()
                    if acc == "d":
                        rl_d = max(rl_d, res)
                    else:
                        rl_l = max(rl_l, res)
        checks += [CheckResult("leibniz d", rl_d, tol), CheckResult("leibniz delta", rl_l, tol)]
    return AxiomReport(tuple(checks))


# -- gauged calculus ------------------------------------------------------------


@dataclass(frozen=True)
class GaugedBiComplex:
    """A calculus plus matrix-valued gauge 1-forms; ``None`` means a vanishing potential."""

    spec: BiComplexSpec
    A: GradedElement | None = None
    B: GradedElement | None = None
    N: int | None = None

    def __post_init__(self):
        for name in ("A", "B"):
            v = getattr(self, name)
            if v is None:
                object.__setattr__(self, name, GradedElement.zero(self.spec.n, 1, self.spec.algebra))
            elif v.degree != 1 or v.n != self.spec.n or v.algebra != self.spec.algebra:
                raise ValueError(f"gauge potential {name} must be a 1-form of the calculus")
        size = getattr(self.spec.algebra, "n", None)
        if self.N is not None and size is not None and size != self.N:
            raise ValueError(f"matrix size {self.N} does not match the coefficient algebra ({size})")

    def D_d(self, m: GradedElement) -> GradedElement:
        return apply_d(self.spec, m) + wedge(self.A, m)

    def D_delta(self, m: GradedElement) -> GradedElement:
        return apply_delta(self.spec, m) + wedge(self.B, m)


def covariant_apply(g: GaugedBiComplex, m: GradedElement):
    """(D_d m, D_delta m) = (d m + A m, delta m + B m)."""
    if m.algebra != g.spec.algebra:
        raise ValueError("dimension mismatch between form and gauge potentials")
    return g.D_d(m), g.D_delta(m)


def curvatures(g: GaugedBiComplex):
    s = g.spec
    Fd = apply_d(s, g.A) + wedge(g.A, g.A)
    Fl = apply_delta(s, g.B) + wedge(g.B, g.B)
    mixed = apply_d(s, g.B) + apply_delta(s, g.A) + wedge(g.B, g.A) + wedge(g.A, g.B)
    return Fd, Fl, mixed


def check_flatness(g: GaugedBiComplex, tol: float | None = None) -> FlatnessReport:
    tol = g.spec.tol if tol is None else tol
    Fd, Fl, mixed = curvatures(g)
    return FlatnessReport((CheckResult("F_d", Fd.norm(), tol), CheckResult("F_delta", Fl.norm(), tol),
                           CheckResult("mixed", mixed.norm(), tol)))


# -- tower ------------------------------------------------------------------------


@dataclass(frozen=True)
class DeltaPrimitive:
    """Model-supplied inverse of D_delta on closed forms, with its base-point convention."""

    solve: Callable[[GradedElement], GradedElement]
    base_point: str = "left boundary"

    def __call__(self, J: GradedElement) -> GradedElement:
        return self.solve(J)


@dataclass(frozen=True)
class LevelLog:
    level: int
    closure_residual: float | None
    primitive_residual: float | None


@dataclass(frozen=True)
class Tower:
    gauged: GaugedBiComplex
    chis: tuple
    currents: tuple          # currents[m-1] = J^(m)
    log: tuple
    s: int = 1

    @property
    def M(self) -> int:
        return len(self.currents)

    def J(self, m: int) -> GradedElement:
        if not 1 <= m <= self.M:
            raise IndexError(f"tower has currents J^(1)..J^({self.M})")
        return self.currents[m - 1]


def _residual(fn):
    try:
        return fn().norm()
    except DerivativeUnavailable:
        return None


def build_tower(g: GaugedBiComplex, chi0: GradedElement, primitive: DeltaPrimitive, M: int,
                tol: float | None = None, closure_tol: float | None = None) -> Tower:
    """Iterate J^(m) = D_d chi^(m-1), chi^(m) = primitive(J^(m)) for m = 1..M.

    Residuals that need derivatives a coefficient representation cannot supply
    are logged as ``None`` rather than checked.
    """
    if M < 1:
        raise ValueError("M must be at least 1")
    tol = g.spec.tol if tol is None else tol
    closure_tol = tol if closure_tol is None else closure_tol
    seed = _residual(lambda: g.D_delta(chi0))
    if seed is not None and not seed <= tol:
        raise SeedNotClosed(seed)
    chis, currents = [chi0], []
    log = [LevelLog(0, seed, None)]
    for m in range(1, M + 1):
        J = g.D_d(chis[-1])
        if not math.isfinite(J.norm()):
            raise TowerError(m, "non-finite current")
        closure = _residual(lambda: g.D_delta(J))
        if closure is not None and not closure <= closure_tol:
            raise TowerError(m, "current is not D_delta-closed", closure)
        try:
            chi = primitive(J)
        except TowerError:
            raise
        except (ValueError, ArithmeticError, LookupError) as exc:
            raise PrimitiveFailure(m, str(exc)) from exc
        prim = _residual(lambda: g.D_delta(chi) - J)
        if prim is not None and not prim <= closure_tol:
            raise PrimitiveFailure(m, "D_delta chi differs from J", prim)
        chis.append(chi)
        currents.append(J)
        log.append(LevelLog(m, closure, prim))
    return Tower(g, tuple(chis), tuple(currents), tuple(log))


def lambda_series(t: Tower, lam: complex, order: int) -> GradedElement:
    """sum_{m <= order} lam^m chi^(m)."""
    if not 0 <= order <= t.M:
        raise ValueError(f"order must lie in 0..{t.M}")
    out = t.chis[0]
    for m in range(1, order + 1):
        out = out + t.chis[m].scale(lam ** m)
    return out


def lambda_defect(g: GaugedBiComplex, chi: GradedElement, lam: complex) -> GradedElement:
    """D_delta chi - lam D_d chi; for a truncated series this is -lam^(order+1) J^(order+1)."""
    return g.D_delta(chi) - g.D_d(chi).scale(lam)


def defect_scaling(g: GaugedBiComplex, t: Tower, order: int, lams: Iterable[float]) -> float:
    """Log-log slope of the defect norm of the truncated series against lambda."""
    lams = list(lams)
    norms = [lambda_defect(g, lambda_series(t, lam, order), lam).norm() for lam in lams]
    slope, _ = np.polyfit(np.log(lams), np.log(norms), 1)
    return float(slope)
