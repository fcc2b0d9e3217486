import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import Polynomial

from bitower import axioms, numgrid
from bitower.algebra import (BiComplexSpec, GaugedBiComplex, GradedElement, apply_d, apply_delta,
                             build_tower, check_bicomplex_axioms, check_flatness, covariant_apply,
                             defect_scaling, lambda_series, wedge)
from bitower.coefficients import ArrayAlgebra, PolynomialAlgebra
from bitower.errors import SeedNotClosed
from bitower.models import chiral, toda

SCALAR = ArrayAlgebra((), dtype=float)


def gen(n, mu, alg=SCALAR):
    return GradedElement.generator(n, alg, mu)


def test_generator_antisymmetry_and_nilpotence():
    a, b = gen(3, 0), gen(3, 1)
    assert wedge(a, b).terms[(0, 1)] == 1.0
    assert wedge(b, a).terms[(0, 1)] == -1.0
    fa = GradedElement(3, 1, SCALAR, {(0,): np.array(2.0)})
    gb = GradedElement(3, 1, SCALAR, {(0,): np.array(5.0)})
    assert wedge(fa, gb).is_zero()


def test_unit_is_identity():
    one = GradedElement.function(3, SCALAR, np.array(1.0))
    b = GradedElement(3, 2, SCALAR, {(0, 2): np.array(3.0), (1, 2): np.array(-1.0)})
    assert wedge(one, b).terms == b.terms
    assert wedge(b, one).terms == b.terms


def test_invalid_elements_rejected():
    with pytest.raises(ValueError):
        GradedElement(3, 2, SCALAR, {(1, 0): np.array(1.0)})
    with pytest.raises(ValueError):
        GradedElement(3, 1, SCALAR, {(0, 1): np.array(1.0)})
    with pytest.raises(ValueError):
        wedge(gen(2, 0), gen(3, 0))
    with pytest.raises(ValueError):
        gen(2, 0) + GradedElement.function(2, SCALAR, np.array(1.0))


forms = st.builds(
    lambda deg, idxs, vals: GradedElement(4, deg, SCALAR, {
        tuple(sorted(ix[:deg])): np.array(float(v)) for ix, v in zip(idxs, vals)}),
    st.integers(0, 2),
    st.lists(st.permutations([0, 1, 2, 3]), min_size=1, max_size=3),
    st.lists(st.integers(-5, 5), min_size=3, max_size=3))


@given(forms, forms, forms)
@settings(max_examples=80, deadline=None)
def test_wedge_associative(a, b, c):
    left = wedge(wedge(a, b), c)
    right = wedge(a, wedge(b, c))
    assert (left - right).is_zero()


@given(forms, forms)
@settings(max_examples=80, deadline=None)
def test_graded_commutativity_for_commuting_coefficients(a, b):
    sign = (-1) ** (a.degree * b.degree)
    assert (wedge(a, b) - wedge(b, a).scale(sign)).is_zero()


def chiral_spec(n=33, h=0.1):
    alg = ArrayAlgebra((n, n), dtype=float)
    Dt, Dx = alg.derivation(0, h), alg.derivation(1, h)
    return BiComplexSpec(alg, M=(Dx, Dt), N=(Dt, Dx), names=("dt", "dx"))


def test_apply_on_constants_and_coordinates():
    spec = chiral_spec()
    c = spec.function(np.full((33, 33), 4.0))
    assert apply_d(spec, c).is_zero() and apply_delta(spec, c).is_zero()
    t, x = np.meshgrid(0.1 * np.arange(33), 0.1 * np.arange(33), indexing="ij")
    f = spec.function(x)
    df, lf = apply_d(spec, f), apply_delta(spec, f)
    assert set(df.terms) == {(0,)} and np.allclose(df.terms[(0,)], 1.0, atol=1e-12)
    assert set(lf.terms) == {(1,)} and np.allclose(lf.terms[(1,)], 1.0, atol=1e-12)


def test_toda_delta_of_q_on_three_sites():
    q = np.array([[0.1, 0.5, -0.2]] * 5) + 0.5 * np.arange(5)[:, None] * np.array([1.0, -2.0, 3.0])
    spec = toda.toda_calculus(q.shape, 0.5, boundary=numgrid.PERIODIC)
    lf = apply_delta(spec, spec.function(spec.algebra.function(q)))
    assert np.allclose(lf.component((0,)).terms[0], np.array([1.0, -2.0, 3.0]))
    expected = np.roll(q, -1, axis=1) - q
    assert np.array_equal(lf.component((1,)).terms[1], expected)


@pytest.mark.parametrize("report", ["toda", "toda field", "non-abelian toda"])
def test_lattice_axioms_exact(report):
    r = axioms.lattice_reports(1)[report]
    assert all(c.max_residual == 0.0 for c in r.checks)
    assert r.passed


def test_lattice_nilpotency_at_roundoff_on_arbitrary_data():
    rng = np.random.default_rng(2)
    spec = toda.toda_calculus((8, 6), 0.3, boundary=numgrid.PERIODIC)
    samples = [spec.algebra.make({-1: rng.normal(size=(8, 6)), 1: rng.normal(size=(8, 6))})]
    r = check_bicomplex_axioms(spec, samples, tol=1e-13, leibniz=False)
    assert r.passed


def test_corrupted_spec_flags_delta_squared():
    alg = PolynomialAlgebra()
    dx = lambda p: p.deriv()
    xdx = lambda p: Polynomial([0, 1]) * p.deriv()
    spec = BiComplexSpec(alg, M=(dx, dx), N=(dx, xdx))
    r = check_bicomplex_axioms(spec, [Polynomial([1, 2, 3, 4])], leibniz=False)
    assert not r["delta^2"].passed
    assert r["d^2"].passed


def test_continuum_order_near_two():
    conv = axioms.chiral_convergence()
    assert conv.order >= 1.9
    assert axioms.chiral_continuum(32)["d^2"].max_residual < 1e-12


def test_covariant_apply_cases():
    spec = chiral_spec(9)
    alg = spec.algebra
    m = spec.function(np.ones((9, 9)) * 2.0)
    g = GaugedBiComplex(spec)
    Dd, Dl = covariant_apply(g, m)
    assert (Dd - apply_d(spec, m)).is_zero() and (Dl - apply_delta(spec, m)).is_zero()
    rng = np.random.default_rng(0)
    A = spec.one_form([rng.normal(size=(9, 9)), rng.normal(size=(9, 9))])
    B = spec.one_form([rng.normal(size=(9, 9)), None])
    g = GaugedBiComplex(spec, A, B)
    Dd, Dl = covariant_apply(g, spec.function(alg.one()))
    assert (Dd - A).is_zero() and (Dl - B).is_zero()
    other = ArrayAlgebra((3,), dtype=float)
    with pytest.raises(ValueError):
        covariant_apply(g, GradedElement.function(2, other, np.ones(3)))


def _su2_field(nt=41, nx=41, h=0.05):
    t, x = np.meshgrid(h * np.arange(nt), h * np.arange(nx) - 1, indexing="ij")
    c = np.stack([np.sin(t + x), 0.5 * np.cos(2 * x - t), 0.3 * t * x], axis=-1)
    return chiral.su2_exp(c), h


def test_covariant_derivative_of_inverse_vanishes():
    g, h = _su2_field()
    n = g.shape[0]
    alg = ArrayAlgebra((n, n), n=2)
    Dt, Dx = alg.derivation(0, h, accuracy=4), alg.derivation(1, h, accuracy=4)
    spec = BiComplexSpec(alg, M=(Dx, Dt), N=(Dt, Dx))
    ginv = np.linalg.inv(g)
    A = spec.one_form([ginv @ Dx(g), ginv @ Dt(g)])
    Dd, _ = covariant_apply(GaugedBiComplex(spec, A), spec.function(ginv))
    assert Dd.norm() < 1e-3


def test_flatness_zero_and_pure_gauge():
    spec = chiral_spec(9)
    assert check_flatness(GaugedBiComplex(spec), tol=0.0).passed
    g, h = _su2_field()
    n = g.shape[0]
    alg = ArrayAlgebra((n, n), n=2)
    Dt, Dx = alg.derivation(0, h, accuracy=4), alg.derivation(1, h, accuracy=4)
    spec = BiComplexSpec(alg, M=(Dx, Dt), N=(Dt, Dx))
    ginv = np.linalg.inv(g)
    A = spec.one_form([ginv @ Dx(g), ginv @ Dt(g)])
    rep = check_flatness(GaugedBiComplex(spec, A), tol=1e-3)
    assert rep["F_d"].passed
    payload = json.loads(rep.dumps())
    assert {"check", "max_residual", "tolerance", "pass"} <= set(payload[0])


def test_seed_must_be_closed():
    spec = chiral_spec(9)
    t, x = np.meshgrid(np.arange(9.0), np.arange(9.0), indexing="ij")
    with pytest.raises(SeedNotClosed):
        build_tower(GaugedBiComplex(spec), spec.function(x), None, 2)


def _toda_tower(M=3):
    tr = toda.integrate_toda(toda.gaussian_pulse(20, 0.5, width=2.0), 2e-3, 1000, 10)
    ht = tr.times[1] - tr.times[0]
    spec = toda.toda_calculus(tr.q.shape, ht, accuracy=4, tol=1e-4, trim=12)
    g = toda.toda_gauge(spec, tr.q, tr.p)
    return g, build_tower(g, spec.function(spec.algebra.one()), toda.toda_primitive(spec), M,
                          closure_tol=1e-3), tr


def test_toda_tower_first_level_is_minus_momentum_sum():
    g, tw, tr = _toda_tower()
    chi1 = tw.chis[1].coefficient.terms[-1]
    ref = -np.concatenate([np.zeros((tr.q.shape[0], 1)), np.cumsum(tr.p, axis=1)[:, :-1]], axis=1)
    assert np.max(np.abs(chi1 - ref)) < 1e-14


def test_lambda_series_trivial_cases_and_scaling():
    g, tw, _ = _toda_tower()
    zero = lambda_series(tw, 0.0, 3)
    assert (zero - tw.chis[0]).is_zero()
    assert (lambda_series(tw, 0.7, 0) - tw.chis[0]).is_zero()
    with pytest.raises(ValueError):
        lambda_series(tw, 0.1, 4)
    for order in (1, 2):
        slope = defect_scaling(g, tw, order, [0.02, 0.01, 0.005])
        assert abs(slope - (order + 1)) <= 0.1 * (order + 1)


def test_reports_serialize():
    r = axioms.toda_exact()
    data = json.loads(r.dumps())
    assert data[0] == {"check": "d^2", "max_residual": 0.0, "tolerance": 0.0, "pass": True}
