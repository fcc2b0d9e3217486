"""Shipped axiom scenarios: exact lattice calculi and finite-difference continuum calculi.

Lattice calculi are checked on integer-valued data with time samples that are at
most linear in t, so every finite-difference stencil involved acts exactly and all
residuals vanish identically.  Continuum calculi commute their difference
operators exactly, so the second-order error shows up in the Leibniz rule; its
convergence order under refinement is what the continuum scenario reports.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numgrid
from .algebra import AxiomReport, BiComplexSpec, check_bicomplex_axioms
from .coefficients import ArrayAlgebra
from .models import toda

HT = 0.5


def _linear_samples(rng, shape, alg, count, n=None, linear_axes=(0,)):
    """Integer arrays a + sum_ax b_ax x_ax, with a and b constant along ``linear_axes``."""
    vshape = shape + ((n, n) if n else ())
    out = []
    for _ in range(count):
        base = list(vshape)
        for ax in linear_axes:
            base[ax] = 1
        c = rng.integers(-3, 4, size=base).astype(float)
        for ax in linear_axes:
            coord = HT * np.arange(shape[ax])
            b = rng.integers(-2, 3, size=base).astype(float)
            sh = [1] * len(vshape)
            sh[ax] = shape[ax]
            c = c + b * coord.reshape(sh)
        terms = {p: c * rng.integers(1, 3) for p in rng.choice([-1, 0, 1], size=2, replace=False)}
        out.append(alg.make(terms))
    return out


def toda_exact(seed: int = 0, shape=(9, 7)) -> AxiomReport:
    """Toda calculus on a periodic lattice window with integer data: every residual is exactly 0."""
    rng = np.random.default_rng(seed)
    spec = toda.toda_calculus(shape, HT, boundary=numgrid.PERIODIC, accuracy=2, tol=0.0)
    return check_bicomplex_axioms(spec, _linear_samples(rng, shape, spec.algebra, 3), tol=0.0)


def toda_field_exact(seed: int = 0, shape=(7, 7, 5)) -> AxiomReport:
    rng = np.random.default_rng(seed)
    spec = toda.toda_field_calculus(shape, HT, HT, boundary=numgrid.PERIODIC, accuracy=2, tol=0.0)
    samples = _linear_samples(rng, shape, spec.algebra, 3, linear_axes=(0, 1))
    return check_bicomplex_axioms(spec, samples, tol=0.0)


def nonabelian_exact(seed: int = 0, shape=(7, 7, 5), n: int = 2) -> AxiomReport:
    rng = np.random.default_rng(seed)
    spec = toda.nonabelian_calculus(shape, n, HT, HT, boundary=numgrid.PERIODIC, accuracy=2, tol=0.0)
    samples = _linear_samples(rng, shape, spec.algebra, 3, n=n, linear_axes=(0, 1))
    return check_bicomplex_axioms(spec, samples, tol=0.0)


def chiral_continuum(n: int, accuracy: int = 2, tol: float = 1e-1) -> AxiomReport:
    """(t, x) calculus d f = f_x dt + f_t dx, delta f = f_t dt + f_x dx on a periodic 2-pi box."""
    h = 2 * np.pi / n
    alg = ArrayAlgebra((n, n), dtype=float)
    Dt = alg.derivation(0, h, numgrid.PERIODIC, accuracy)
    Dx = alg.derivation(1, h, numgrid.PERIODIC, accuracy)
    spec = BiComplexSpec(alg, M=(Dx, Dt), N=(Dt, Dx), tol=tol, names=("dt", "dx"))
    t, x = np.meshgrid(h * np.arange(n), h * np.arange(n), indexing="ij")
    samples = [np.sin(t + 2 * x), np.cos(x) * np.exp(np.sin(t)), 1 + 0.5 * np.sin(t - x)]
    return check_bicomplex_axioms(spec, samples, tol=tol)


@dataclass(frozen=True)
class Convergence:
    check: str
    steps: tuple
    residuals: tuple

    @property
    def order(self) -> float:
        return numgrid.observed_order(self.steps, self.residuals)

    def to_json(self) -> dict:
        return {"check": self.check, "steps": list(self.steps), "residuals": list(self.residuals),
                "order": self.order}


def chiral_convergence(ns=(16, 32, 64, 128), check: str = "leibniz d") -> Convergence:
    steps, res = [], []
    for n in ns:
        steps.append(2 * np.pi / n)
        res.append(chiral_continuum(n)[check].max_residual)
    return Convergence(f"continuum {check}", tuple(steps), tuple(res))


def lattice_reports(seed: int = 0) -> dict:
    return {"toda": toda_exact(seed), "toda field": toda_field_exact(seed),
            "non-abelian toda": nonabelian_exact(seed)}
