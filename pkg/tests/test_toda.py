import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bitower import numgrid
from bitower.algebra import build_tower, curvatures
from bitower.errors import NumericFailure
from bitower.models import toda as T


def rand_state(n=64, seed=0, scale=0.5):
    rng = np.random.default_rng(seed)
    return T.TodaState(rng.normal(scale=scale, size=n), rng.normal(scale=scale, size=n))


def test_state_validation():
    with pytest.raises(ValueError):
        T.TodaState(np.zeros(2), np.zeros(2))
    with pytest.raises(NumericFailure):
        T.TodaState(np.array([0, np.nan, 0]), np.zeros(3))


def test_rhs_trivial_cases():
    assert np.array_equal(T.toda_rhs(np.zeros(8)), np.zeros(8))
    a = 0.7
    q = np.zeros(9)
    q[4] = a
    assert np.isclose(T.toda_rhs(q)[4], np.exp(-a) - np.exp(a), rtol=0, atol=1e-15)


def test_rhs_overflow_is_numeric_failure():
    q = np.zeros(5)
    q[1] = 1e4
    with pytest.raises(NumericFailure):
        T.toda_rhs(q)


def _grad(H, q, p, h=1e-6):
    g = np.zeros_like(q)
    for j in range(q.size):
        e = np.zeros_like(q)
        e[j] = h
        g[j] = (H(q + e, p) - H(q - e, p)) / (2 * h)
    return g


def test_rhs_is_gradient_of_bond_energy_in_the_interior():
    s = rand_state(16, 1)
    g = _grad(T.energy_closed_form, s.q, s.p)
    assert np.max(np.abs(T.toda_rhs(s.q)[1:-1] + g[1:-1])) < 1e-8


def test_rhs_is_gradient_of_window_hamiltonian_everywhere():
    s = rand_state(16, 2)
    g = _grad(T.hamiltonian, s.q, s.p)
    assert np.max(np.abs(T.toda_rhs(s.q) + g)) < 1e-8


def test_stationary_and_momentum_conservation():
    tr = T.integrate_toda(T.TodaState(np.zeros(8), np.zeros(8)), 1e-2, 100)
    assert np.all(tr.q == 0) and np.all(tr.p == 0)
    tr = T.integrate_toda(rand_state(32, 3), 1e-2, 2000, record_every=100)
    mom = tr.p.sum(axis=1)
    assert np.max(np.abs(mom - mom[0])) < 1e-12


def test_energy_drift_scales_like_dt_squared():
    s = rand_state(24, 4)
    drifts = []
    for dt in (0.04, 0.02, 0.01):
        tr = T.integrate_toda(s, dt, int(round(2 / dt)))
        H = np.array([T.hamiltonian(q, p) for q, p in zip(tr.q, tr.p)])
        drifts.append(np.max(np.abs(H - H[0])))
    order = numgrid.observed_order([0.04, 0.02, 0.01], drifts)
    assert order > 1.8


def test_chi_vanishes_at_rest():
    chi = T.toda_chi(np.zeros(6), np.zeros(6), 2)
    assert np.all(chi[0] == 1) and np.all(chi[1] == 0) and np.all(chi[2] == 0)


def test_chi_forward_difference_identity():
    s = rand_state(20, 5)
    chi = T.toda_chi(s.q, s.p, 4)
    X = T.bonds(s.q)
    for m in range(2, 5):
        prev2 = chi[m - 2][:-1]
        ghost = np.concatenate([prev2[:1], prev2[:-1]])
        rhs = -s.p * chi[m - 1][:-1] + prev2 - X * ghost
        assert np.array_equal(np.diff(chi[m]), np.diff(np.concatenate([[0], np.cumsum(rhs)])))
        assert np.allclose(np.diff(chi[m]), rhs, rtol=0, atol=1e-12)


def test_chi2_double_sum():
    s = rand_state(15, 6)
    chi = T.toda_chi(s.q, s.p, 2)[2]
    X = T.bonds(s.q)
    n = s.q.size
    for k in range(n + 1):
        ref = 0.0
        for j in range(k):
            ref += sum(s.p[j] * s.p[l] for l in range(j)) + 1 - X[j]
        assert abs(chi[k] - ref) < 1e-12


def test_charge_combos_match_closed_forms_on_random_states():
    for seed in range(5):
        s = rand_state(64, 10 + seed)
        Q, edge = T.charges_of(s.q, s.p, 3)
        mom, en, cub = T.combos(Q)
        cmom, cen, ccub = T.closed_forms(s.q, s.p)
        assert abs(-Q[0] - s.p.sum()) <= 1e-12 * max(1, abs(cmom))
        assert abs(mom - cmom) <= 1e-12 * max(1, abs(cmom))
        assert abs(en - cen) <= 1e-12 * max(1, abs(cen))
        assert abs(cub - ccub) <= 1e-11 * max(1, abs(ccub))
        assert np.max(np.abs(Q - edge)) <= 1e-12


def test_charges_conserved_by_pulse_evolution():
    tr = T.integrate_toda(T.gaussian_pulse(64), 1e-3, 4000, record_every=20)
    s = T.toda_charges(tr, 3)
    assert not s.warned
    for m in (1, 2, 3):
        assert s.drift(m).max() <= 1e-6
    assert s.edge_check.max() <= 1e-12
    H = np.array([T.energy_closed_form(q, p) for q, p in zip(tr.q, tr.p)])
    assert np.allclose(s.energy, H, rtol=0, atol=1e-12)


def test_edge_warning_for_active_edges():
    q = np.zeros(8)
    p = np.zeros(8)
    p[0] = 0.1
    assert T.edge_warning(q, p)
    assert not T.edge_warning(np.zeros(8), np.zeros(8))


def test_soliton_solves_equation():
    dt = 1e-3
    ts = np.arange(-2, 3) * dt
    q = np.array([T.soliton(40, 0.8, t, offset=20)[0] for t in ts])
    qtt = (q[3] - 2 * q[2] + q[1]) / dt**2
    acc = T.toda_rhs(q[2])
    core = slice(5, 35)
    assert np.max(np.abs(qtt - acc)[core]) < 1e-5


def test_field_residual_trivial_and_probe():
    shape = (9, 9, 6)
    assert np.array_equal(T.toda_field_residual(np.zeros(shape), 0.1, 0.1), np.zeros(shape))
    k = np.arange(6)
    lin = np.broadcast_to(0.3 * k, shape)
    assert np.max(np.abs(T.toda_field_residual(lin, 0.1, 0.1)[..., 1:-1])) < 1e-15
    rng = np.random.default_rng(7)
    h = 0.05
    t = h * np.arange(9)
    x = h * np.arange(9)
    c = rng.normal(size=6) * 0.3
    Tm, Xm, _ = np.meshgrid(t, x, k, indexing="ij")
    q = c[None, None, :] * Tm * Xm + 0.1 * np.sin(Xm)
    r = T.toda_field_residual(q, h, h)
    i, j, kk = 4, 4, 3
    qk = q[i, j]
    hand = c[kk] - (np.exp(qk[kk] - qk[kk + 1]) - np.exp(qk[kk - 1] - qk[kk]))
    assert abs(r[i, j, kk] - hand) < 1e-10


def test_hik_residual_cases():
    shape = (9, 9, 5)
    assert np.array_equal(T.hik_residual(np.zeros(shape), 0.1, 0.1), np.zeros(shape))
    h = 0.1
    t = h * np.arange(9)
    x = h * np.arange(9)
    Tm, Xm = np.meshgrid(t, x, indexing="ij")
    u = np.repeat((Tm * Xm)[..., None], 5, axis=2)
    assert np.allclose(T.hik_residual(u, h, h), 1.0, atol=1e-12)  # residual = u_tx
    rng = np.random.default_rng(8)
    c = rng.normal(size=5)
    u = c[None, None, :] * (Tm * Xm)[..., None]
    r = T.hik_residual(u, h, h)
    i, j, k = 4, 5, 2
    ut = c[k] * x[j]
    hand = c[k] + (1 + ut) * (u[i, j, k + 1] + u[i, j, k - 1] - 2 * u[i, j, k])
    assert abs(r[i, j, k] - hand) < 1e-12


def test_nonabelian_residuals():
    shape = (7, 7, 5, 2, 2)
    r1, r2 = T.nonabelian_toda_residual(np.zeros(shape), np.zeros(shape), 0.1, 0.1)
    assert not r1.any() and not r2.any()
    A = np.diag([1.0, 2.0])
    B = np.diag([0.5, -1.0])
    X = np.broadcast_to(A, shape).copy()
    Y = np.broadcast_to(B, shape).copy()
    r1, r2 = T.nonabelian_toda_residual(X, Y, 0.1, 0.1)
    assert np.max(np.abs(r1)) == 0 and np.max(np.abs(r2)) == 0
    rng = np.random.default_rng(9)
    h = 0.1
    lin = h * np.arange(7)
    Y = rng.normal(size=(1, 1, 5, 2, 2)) * lin[:, None, None, None, None] + np.zeros(shape)
    X = rng.normal(size=(1, 1, 5, 2, 2)) * lin[None, :, None, None, None] + np.zeros(shape)
    r1, r2 = T.nonabelian_toda_residual(X, Y, h, h)
    i, j, k = 3, 3, 2
    hand1 = (X[i, j + 1, k] - X[i, j, k]) / h - (Y[i, j, k] - Y[i, j, k - 1])
    hand2 = (Y[i + 1, j, k] - Y[i, j, k]) / h - (Y[i, j, k] @ X[i, j, k + 1] - X[i, j, k] @ Y[i, j, k])
    assert np.allclose(r1[i, j, k], hand1, atol=1e-12)
    assert np.allclose(r2[i, j, k], hand2, atol=1e-12)


def _history(n=24, ht=0.02, T_end=2.0):
    tr = T.integrate_toda(T.gaussian_pulse(n, 0.6, width=2.0), ht / 10, int(round(T_end / ht)) * 10, 10)
    return tr


def test_tower_reproduces_chi_tilde():
    tr = _history()
    ht = tr.times[1] - tr.times[0]
    spec = T.toda_calculus(tr.q.shape, ht, accuracy=4, tol=1e-4, trim=12)
    g = T.toda_gauge(spec, tr.q, tr.p)
    alg = spec.algebra
    tw = build_tower(g, spec.function(alg.one()), T.toda_primitive(spec), 3, closure_tol=1e-3)
    chi = T.toda_chi(tr.q, tr.p, 3)
    for m in (1, 2, 3):
        got = tw.chis[m].coefficient.terms[-m]
        ref = chi[m][:, :-1]
        tol = 1e-14 if m == 1 else 1e-5
        assert np.max(np.abs(got - ref)[12:-12]) < tol


def test_mixed_curvature_is_equation_defect():
    tr = _history()
    ht = tr.times[1] - tr.times[0]
    spec = T.toda_calculus(tr.q.shape, ht, accuracy=4)
    g = T.toda_gauge(spec, tr.q, tr.p)
    _, _, mixed = curvatures(g)
    comp = mixed.component((0, 1)).terms
    defect = T.toda_defect(tr.q, tr.p, ht, 4)
    sl = (slice(4, -4), slice(1, -1))
    assert np.max(np.abs((comp[0] + defect)[sl])) < 1e-6
    assert np.max(np.abs(defect[sl])) < 1e-5


@given(st.integers(3, 12), st.integers(0, 2**31))
@settings(max_examples=25, deadline=None)
def test_edge_difference_identity_property(n, seed):
    s = rand_state(n, seed)
    Q, edge = T.charges_of(s.q, s.p, 3)
    assert np.max(np.abs(Q - edge)) <= 1e-12 * max(1.0, np.max(np.abs(Q)))
