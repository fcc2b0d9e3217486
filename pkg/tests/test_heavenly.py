import numpy as np
import pytest
import sympy as sp

from bitower import numgrid
from bitower.errors import TowerError
from bitower.models import heavenly as hv


@pytest.fixture(scope="module")
def flat():
    g = hv.flat_grid(9)
    return g, hv.HeavenlyConfig(g, hv.flat_solution(g))


def _smooth(g, a, b):
    t, x, q, p = g.mesh()
    return np.sin(a * q + x) * np.cos(b * p - t) + 0.3 * q * p


def test_bracket_trivial_cases(flat):
    g, cfg = flat
    _, _, q, p = g.mesh()
    f = _smooth(g, 1.0, 2.0)
    assert np.all(hv.poisson(f, f, cfg) == 0.0)
    assert np.max(np.abs(hv.poisson(q, p, cfg) - 1.0)) < 1e-13
    gg = _smooth(g, 0.5, -1.0)
    assert np.all(hv.poisson(f, gg, cfg) == -hv.poisson(gg, f, cfg))
    lin = hv.poisson(2 * f + 3 * gg, q, cfg) - 2 * hv.poisson(f, q, cfg) - 3 * hv.poisson(gg, q, cfg)
    assert np.max(np.abs(lin)) < 1e-12


def test_bracket_shape_check(flat):
    _, cfg = flat
    with pytest.raises(ValueError):
        hv.poisson(np.zeros((3, 3)), np.zeros((3, 3)), cfg)


def _jacobi_and_leibniz(n):
    g = hv.flat_grid(n)
    cfg = hv.HeavenlyConfig(g, hv.flat_solution(g))
    f, u, w = _smooth(g, 1.0, 2.0), _smooth(g, -0.7, 1.3), _smooth(g, 0.4, 0.9)
    P = lambda a, b: hv.poisson(a, b, cfg)
    jac = P(f, P(u, w)) + P(u, P(w, f)) + P(w, P(f, u))
    leib = P(f * u, w) - f * P(u, w) - P(f, w) * u
    inner = hv.core(g, 0.25)
    return g.axes[0].step, np.max(np.abs(jac[inner])), np.max(np.abs(leib))


def test_jacobi_and_leibniz_converge_at_second_order():
    rows = [_jacobi_and_leibniz(n) for n in (9, 17, 33)]
    steps = [r[0] for r in rows]
    assert numgrid.observed_order(steps, [r[1] for r in rows]) > 1.8
    assert rows[-1][2] < 1e-2
    assert numgrid.observed_order(steps, [r[2] for r in rows]) > 1.8


def test_flat_and_zero_residuals(flat):
    g, cfg = flat
    R = hv.heavenly_residual(cfg)
    assert np.all(R == 0.0)
    R0 = hv.heavenly_residual(hv.HeavenlyConfig(g, np.zeros(g.shape)))
    assert np.all(R0[0, 1] == -1.0) and np.all(R0[1, 0] == 1.0)
    Rd = hv.heavenly_residual(hv.HeavenlyConfig(g, hv.dressed_solution(g)))
    assert np.all(Rd == -np.swapaxes(Rd, 0, 1))


def test_first_order_expansion_in_epsilon():
    t, x, q, p, eps = sp.symbols("t x q p eps")
    f = sp.sin(t + 2 * q) * sp.cos(x - p) + t * x * q
    Om = t * q + x * p + eps * f
    R = sp.diff(Om, x, p) * sp.diff(Om, t, q) - sp.diff(Om, x, q) * sp.diff(Om, t, p) - 1
    lin = sp.lambdify((t, x, q, p), sp.diff(R, eps).subs(eps, 0), "numpy")
    g = hv.flat_grid(33, -0.5, 0.5)
    T, X, Q, P = g.mesh()
    fnum = sp.lambdify((t, x, q, p), f, "numpy")
    e = 1e-4
    cfg = hv.HeavenlyConfig(g, hv.flat_solution(g) + e * fnum(T, X, Q, P), accuracy=4)
    R01 = hv.heavenly_residual(cfg)[0, 1]
    inner = hv.core(g, 0.25)
    assert np.max(np.abs(R01 - e * lin(T, X, Q, P))[inner]) < 5 * e**2 + 1e-9


def test_dressed_solution_is_exact_symbolically():
    t, x, q, p = sp.symbols("t x q p")
    T = t + sp.Rational(3, 10) * sp.sin(x)
    X = x + sp.Rational(1, 5) * sp.cos(T)
    Q = q + sp.Rational(3, 10) * sp.cos(p)
    P = p + sp.Rational(1, 5) * sp.sin(Q)
    Om = T * Q + X * P + sp.sin(T + P) / 4 + T * X**2 / 2 + Q * P**2 / 10
    R = sp.diff(Om, x, p) * sp.diff(Om, t, q) - sp.diff(Om, x, q) * sp.diff(Om, t, p) - 1
    rf = sp.lambdify((t, x, q, p), R, "numpy")
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1, 1, size=(4, 200))
    assert np.max(np.abs(rf(*pts))) < 1e-12
    g = hv.flat_grid(17)
    ref = sp.lambdify((t, x, q, p), Om, "numpy")(*g.mesh())
    assert np.max(np.abs(ref - hv.dressed_solution(g))) < 1e-13


def test_flat_tower_brackets(flat):
    g, cfg = flat
    _, x, q, _ = g.mesh()
    levels = hv.heavenly_tower(cfg, q, M=2)
    # {q, tq + xp} = q_q Omega_p - q_p Omega_q = x
    assert np.max(np.abs(levels[0].chi - x)) < 1e-13
    assert levels[1].conservation_residual < 1e-12
    assert [lv.m for lv in levels] == [1, 2]


def test_constant_seed_gives_zero_tower(flat):
    g, cfg = flat
    levels = hv.heavenly_tower(cfg, np.full(g.shape, 2.0), M=3)
    for lv in levels:
        assert np.all(lv.chi == 0.0) and np.all(lv.J == 0.0)


def test_tower_guards(flat):
    g, cfg = flat
    t, _, q, _ = g.mesh()
    with pytest.raises(TowerError, match="seed depends"):
        hv.heavenly_tower(cfg, q + t)
    with pytest.raises(TowerError, match="heavenly equation"):
        hv.heavenly_tower(hv.HeavenlyConfig(g, np.zeros(g.shape)), q)


def test_dressed_tower_converges():
    out = hv.refinement_study()
    lv1, lv2 = out["levels"]
    assert lv1["at_roundoff"] and lv1["conservation_residual"] < 1e-10
    assert 1.8 <= lv2["order"] <= 2.3
    assert set(hv.HeavenlyLevel(1, None, None, 0.0, 0.0).to_json()) == {
        "m", "conservation_residual", "primitive_residual"}


def test_config_validation(flat):
    g, _ = flat
    with pytest.raises(ValueError):
        hv.HeavenlyConfig(g, np.zeros((3, 3)))
    with pytest.raises(ValueError):
        hv.HeavenlyConfig(g, np.zeros(g.shape), omega=np.eye(2))
    with pytest.raises(ValueError):
        hv.HeavenlyConfig(g, np.zeros(g.shape), omega=np.zeros((2, 2)))
    with pytest.raises(ValueError):
        hv.HeavenlyConfig(g, np.zeros(g.shape), n=2)
    with pytest.raises(ValueError):
        hv.core(g, 0.6)


def test_higher_dimensional_smoke():
    ax = [numgrid.Axis(f"x{i}", -1.0, 0.5, 5) for i in range(4)] + \
         [numgrid.Axis(f"y{i}", -1.0, 0.5, 5) for i in range(2)]
    g = numgrid.Grid(tuple(ax))
    c = g.mesh()
    Om = c[0] * c[4] + c[1] * c[5]
    cfg = hv.HeavenlyConfig(g, Om, n=2, m=1, omega_t=np.zeros((4, 4)))
    R = hv.heavenly_residual(cfg)
    assert R.shape == (4, 4) + g.shape
    assert np.max(np.abs(R[0, 1] - 1.0)) < 1e-12
