"""Quick self-checks on the trivial cases of each model, one list of checks per CLI subcommand."""

from __future__ import annotations

import numpy as np

from . import diffpoly as dp
from . import numgrid
from .algebra import (BiComplexSpec, CheckResult, GaugedBiComplex, GradedElement, apply_d, apply_delta,
                      check_flatness, wedge)
from .coefficients import ArrayAlgebra
from .errors import NonzeroMeanError
from .models import backlund, chiral, heavenly, kp, sdym, toda


def _sup(a) -> float:
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def _flag(name: str, ok: bool) -> CheckResult:
    return CheckResult(name, 0.0 if ok else 1.0, 0.0)


def _raises(fn, exc) -> bool:
    try:
        fn()
    except exc:
        return True
    return False


def axioms() -> list[CheckResult]:
    alg = ArrayAlgebra((5,), dtype=float)
    g1 = GradedElement.generator(2, alg, 0)
    g2 = GradedElement.generator(2, alg, 1)
    b = GradedElement.one_form(2, alg, [np.arange(5.0), None])
    anti = wedge(g1, g2) + wedge(g2, g1)
    unit = wedge(GradedElement.function(2, alg, alg.one()), b) - b
    f = GradedElement.one_form(2, alg, [np.arange(5.0), None])
    rep = wedge(f, f)
    D = alg.derivation(0, 0.5)
    n = 16
    h = 2 * np.pi / n
    a2 = ArrayAlgebra((n, n), dtype=float)
    Dt, Dx = a2.derivation(0, h, numgrid.PERIODIC), a2.derivation(1, h, numgrid.PERIODIC)
    s = BiComplexSpec(a2, M=(Dx, Dt), N=(Dt, Dx))
    x = np.broadcast_to(h * np.arange(n), (n, n)).copy()
    fx = s.function(np.sin(x))
    dl, d = apply_delta(s, fx), apply_d(s, fx)
    cos = np.cos(x)
    flat = check_flatness(GaugedBiComplex(s))
    per = numgrid.Axis("k", 0.0, 1.0, 8, numgrid.PERIODIC)
    v = np.arange(8.0)
    return [
        CheckResult("xi1 xi2 = -xi2 xi1", anti.norm(), 0.0),
        CheckResult("unit 0-form is a left identity", unit.norm(), 0.0),
        CheckResult("repeated generator wedge vanishes", rep.norm(), 0.0),
        CheckResult("derivation of a constant", _sup(D(np.full(5, 3.0))), 0.0),
        CheckResult("delta f puts f_x on dx", _sup(dl.component((1,)) - cos) + _sup(dl.component((0,))), 5e-2),
        CheckResult("d f puts f_x on dt", _sup(d.component((0,)) - cos) + _sup(d.component((1,))), 5e-2),
        CheckResult("ungauged calculus is flat", max(c.max_residual for c in flat.checks), 0.0),
        CheckResult("derivative of a constant field", _sup(numgrid.derivative(np.full(9, 2.5), 0, 0.1)), 0.0),
        CheckResult("primitive of zero", _sup(numgrid.cumulative(np.zeros(9), 0, 0.1)), 0.0),
        _flag("periodic primitive of 1 is rejected",
              _raises(lambda: numgrid.cumulative(np.ones(8), 0, 1.0, numgrid.PERIODIC), NonzeroMeanError)),
        CheckResult("periodic shift round trip",
                    _sup(numgrid.shift_array(numgrid.shift_array(v, 0, 3, per.boundary), 0, -3, per.boundary) - v),
                    0.0),
        CheckResult("decaying left ghost", abs(numgrid.shift_array(v, 0, -1)[0] - v[0]), 0.0),
    ]


def _diffpoly_checks() -> list[CheckResult]:
    u = dp.U
    ux = dp.d_x(u)
    return [
        _flag("p + (-1) p = 0", (ux * u + u * (-1) * ux).is_zero()),
        _flag("u u = u^2", u * u == dp.DiffPoly.atom(dp.D(0, 0), 2)),
        _flag("d_x int_x u = u", dp.d_x(dp.int_x(u)) == u),
        _flag("d_x u^2 = 2 u u_x", dp.d_x(u * u) == u * ux * 2),
        _flag("int_x u_x = u", dp.int_x(ux) == u),
        _flag("int_x 0 = 0", dp.int_x(dp.ZERO).is_zero()),
    ]


def kp_densities() -> list[CheckResult]:
    return [_flag("phi0_x = -u", dp.kp_density_recursion(0)[0] == -dp.U)] + _diffpoly_checks()


def kp_conserve() -> list[CheckResult]:
    g = numgrid.Grid((numgrid.Axis("x", 0.0, 0.1, 32, numgrid.PERIODIC),))
    z = np.zeros(32)
    tr = kp.kdv_integrate(z, 0.1, 1e-3, 5)
    Q = kp.kp_conservation_check([numgrid.SampledField(g, z)], M=3).Q
    neg = dp.evaluate(-dp.U, numgrid.SampledField(g, np.sin(g.axes[0].coords)))
    return [
        CheckResult("KP residual of u = 0", _sup(kp.kp_residual(np.zeros((5, 16, 8)), 0.1, 0.1, 0.1)), 0.0),
        CheckResult("u0 = 0 is stationary", _sup(tr.u), 0.0),
        CheckResult("charges of u = 0", _sup(Q), 0.0),
        CheckResult("-u evaluates to negation", _sup(neg + np.sin(g.axes[0].coords)), 0.0),
    ]


def toda_checks() -> list[CheckResult]:
    q0 = np.zeros(8)
    one = q0.copy()
    one[3] = 0.7
    tr = toda.integrate_toda(toda.TodaState(q0, q0.copy()), 1e-2, 10)
    chi = toda.toda_chi(q0, q0, 2)
    r = toda.toda_field_residual(np.zeros((5, 6, 7)), 0.1, 0.1)
    k = np.arange(7.0)
    lin = toda.toda_field_residual(np.broadcast_to(0.3 * k, (5, 6, 7)).copy(), 0.1, 0.1)
    return [
        CheckResult("q = 0 has no force", _sup(toda.toda_rhs(q0)), 0.0),
        CheckResult("single excited site", abs(toda.toda_rhs(one)[3] - (np.exp(-0.7) - np.exp(0.7))), 1e-15),
        CheckResult("rest state is stationary", _sup(tr.q) + _sup(tr.p), 0.0),
        CheckResult("chi of the rest state", _sup(chi[1]) + _sup(chi[2]) + _sup(chi[0] - 1), 0.0),
        CheckResult("field residual of q = 0", _sup(r), 0.0),
        CheckResult("field residual of q linear in k", _sup(lin[..., 1:-1]), 1e-15),
    ]


def chiral_checks() -> list[CheckResult]:
    n = 32
    g0 = np.broadcast_to(chiral.su2_exp(np.array([0.3, 0.1, 0.0])), (n, 2, 2)).copy()
    tr = chiral.chiral_integrate(g0, np.zeros_like(g0), 0.1, 0.02, 5)
    ch = chiral.chiral_charges(tr, M=2)
    return [
        CheckResult("constant g is stationary", _sup(tr.g - g0), 1e-15),
        CheckResult("charges of constant g", _sup(ch.Q), 0.0),
        CheckResult("pseudodual residual of 0", _sup(chiral.pseudodual_residual(np.zeros((6, 8, 2, 2)), 0.1, 0.1)),
                    0.0),
    ]


def chiral3d_checks() -> list[CheckResult]:
    g = np.broadcast_to(np.eye(2, dtype=complex), (6, 8, 7, 2, 2))
    z = np.zeros((2, 8, 7, 2, 2), complex)
    Q = chiral.chiral3d_charges(z, z, 0.1, 0.1).Q
    return [CheckResult("constant g solves the 3D equation", _sup(chiral.chiral3d_residual(g, 0.1, 0.1, 0.1)), 0.0),
            CheckResult("charges of constant g", _sup(Q), 0.0)]


def backlund_sg() -> list[CheckResult]:
    g = backlund.LightconeGrid.square(-1.0, 1.0, 21)
    res = backlund.sg_backlund(backlund.vacuum(), 1.0, 0.0, g)
    return [
        CheckResult("vacuum with psi0 = 0 stays 0", _sup(res.field), 0.0),
        CheckResult("residual of phi = 0", _sup(backlund.sg_residual(np.zeros((9, 9)), 0.1, 0.1)), 0.0),
        CheckResult("residual of phi = pi", _sup(backlund.sg_residual(np.full((9, 9), np.pi), 0.1, 0.1)), 1e-15),
    ]


def backlund_liouville() -> list[CheckResult]:
    r = backlund.liouville_residual(np.zeros((9, 9)), 0.1, 0.1)
    return [CheckResult("residual of phi = 0 is -1", _sup(r + 1.0), 0.0)]


def sdym_checks() -> list[CheckResult]:
    k = sdym.KappaMap.identity(2)
    z = np.zeros((2, 2))
    U = np.array([[0.0, 1.0], [-1.0, 0.0]])
    F = sdym.Curvature(U, 2 * U, z)
    grid = numgrid.Grid(tuple(numgrid.Axis(nm, 0.0, 0.1, 6) for nm in ("x", "xb")))
    zero = np.zeros((1, 6, 6, 1, 1), complex)
    g = np.broadcast_to(np.eye(2, dtype=complex), (6, 6, 6, 6, 2, 2))
    return [
        CheckResult("star of zero", sdym.star2(sdym.Curvature(z, z, z), k).sup(), 0.0),
        CheckResult("unmixed star is negation", (sdym.star2(F, k) - sdym.Curvature(-U, -2 * U, z)).sup(), 0.0),
        CheckResult("curvature of A = 0", sdym.curvature(sdym.GaugePotential2n(grid, zero, zero)).sup(), 0.0),
        CheckResult("Yang residual of g = I", _sup(sdym.yang_residual(g, (0.1,) * 4)), 0.0),
    ]


def heavenly_checks() -> list[CheckResult]:
    g = heavenly.flat_grid(9)
    cfg = heavenly.HeavenlyConfig(g, heavenly.flat_solution(g))
    t, x, q, p = g.mesh()
    f = np.sin(q + t) * np.cos(p)
    zero = heavenly.heavenly_residual(heavenly.HeavenlyConfig(g, np.zeros(g.shape)))
    levels = heavenly.heavenly_tower(cfg, np.full(g.shape, 2.0), M=2)
    return [
        CheckResult("{f, f} = 0", _sup(heavenly.poisson(f, f, cfg)), 0.0),
        CheckResult("{q, p} = 1", _sup(heavenly.poisson(q, p, cfg) - 1.0), 1e-13),
        CheckResult("flat solution residual", _sup(heavenly.heavenly_residual(cfg)), 0.0),
        CheckResult("Omega = 0 residual is -1", _sup(zero[0, 1] + 1.0), 0.0),
        CheckResult("constant seed gives zero currents", max(_sup(lv.J) + _sup(lv.chi) for lv in levels), 0.0),
    ]


SELFTESTS = {
    "axioms": axioms,
    "toda": toda_checks,
    "chiral": chiral_checks,
    "chiral3d": chiral3d_checks,
    "kp-densities": kp_densities,
    "kp-conserve": kp_conserve,
    "backlund-sg": backlund_sg,
    "backlund-liouville": backlund_liouville,
    "sdym": sdym_checks,
    "heavenly": heavenly_checks,
}
