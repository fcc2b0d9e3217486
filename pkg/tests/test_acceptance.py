"""End-to-end acceptance checks, one per criterion, each printing a PASS/FAIL line with its timing."""

import time
from fractions import Fraction as F

import numpy as np

from bitower import axioms as ax
from bitower.diffpoly import D, DiffPoly, Int, U, kp_density_recursion
from bitower.models import backlund, chiral, heavenly, kp, sdym, toda


def _line(capsys, n, ok, summary, elapsed, budget):
    ok = ok and elapsed <= budget
    with capsys.disabled():
        print(f"\n[{n}] {'PASS' if ok else 'FAIL'} {summary} ({elapsed:.2f} s of {budget:g} s)")
    return ok


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def _kp_oracle():
    u = DiffPoly.u

    def prim(p, n=1):
        for _ in range(n):
            (mono, c), = p.items()
            p = DiffPoly({((Int(1, mono), 1),): c})
        return p

    uuy = DiffPoly({((Int(1, ((D(0, 0), 1), (D(0, 1), 1))), 1),): 1})
    return [
        -U,
        -F(1, 2) * prim(u(0, 1)) + F(1, 2) * u(1),
        -F(1, 2) * U * U - F(1, 4) * u(2) + F(1, 2) * u(0, 1) - F(1, 4) * prim(u(0, 2), 2),
        -F(1, 2) * U * prim(u(0, 1)) - F(1, 2) * uuy + U * u(1) - F(1, 8) * prim(u(0, 3), 3)
        + F(3, 8) * prim(u(0, 2)) - F(3, 8) * u(1, 1) + F(1, 8) * u(3),
    ]


def test_1_kp_densities(capsys):
    got, el = _timed(lambda: kp_density_recursion(3))
    ok = got == _kp_oracle()
    assert _line(capsys, 1, ok, "KP densities phi0..phi3 match exactly", el, 1.0)


def test_2_toda_closed_forms(capsys):
    def run():
        worst = 0.0
        rng = np.random.default_rng(2)
        for _ in range(20):
            q, p = rng.normal(scale=0.5, size=64), rng.normal(scale=0.5, size=64)
            Q, edge = toda.charges_of(q, p, 3)
            got, ref = toda.combos(Q), toda.closed_forms(q, p)
            worst = max(worst, *(abs(a - b) / max(1.0, abs(b)) for a, b in zip(got, ref)),
                        float(np.max(np.abs(Q - edge))))
        return worst

    worst, el = _timed(run)
    ok = worst <= 1e-11
    assert _line(capsys, 2, ok, f"Toda momentum/energy/cubic vs closed forms, worst rel {worst:.2e}", el, 1.0)


def test_3_toda_pulse(capsys):
    def run():
        tr = toda.integrate_toda(toda.gaussian_pulse(64), 1e-3, 10000, record_every=10)
        return toda.toda_charges(tr, 3)

    s, el = _timed(run)
    drift = max(float(s.drift(m).max()) for m in (1, 2, 3))
    edge = float(s.edge_check.max())
    ok = drift <= 1e-6 and edge <= 1e-12
    assert _line(capsys, 3, ok, f"Toda pulse drift {drift:.2e} (≤1e-6), edge {edge:.2e} (≤1e-12)", el, 30.0)


def test_4_chiral_su2(capsys):
    def run():
        return chiral.chiral_charges(chiral.su2_run(512, 5.0), M=2)

    s, el = _timed(run)
    d1, d2 = float(s.drift(1).max()), float(s.drift(2).max())
    ok = d1 <= 1e-4 and d2 <= 1e-4 and s.q2_gap <= 1e-12
    assert _line(capsys, 4, ok, f"chiral SU(2) drifts Q1 {d1:.2e}, Q2 {d2:.2e} (≤1e-4), "
                                f"tower Q2 gap {s.q2_gap:.1e}", el, 60.0)


def test_5_axioms(capsys):
    def run():
        reps = ax.lattice_reports(0)
        worst = max(c.max_residual for r in reps.values() for c in r.checks)
        return worst, ax.chiral_convergence()

    (worst, conv), el = _timed(run)
    ok = worst == 0.0 and conv.order >= 1.9
    assert _line(capsys, 5, ok, f"lattice d², δ², dδ+δd residual {worst:g}, continuum order {conv.order:.3f}",
                 el, 10.0)


def test_6_backlund(capsys):
    def run():
        sg, kink = backlund.sg_kink_scenario(201)
        lv, _ = backlund.liouville_scenario(201)
        g, h = sg.grid, lv.grid
        return (float(np.max(np.abs(sg.field - kink))),
                float(np.max(np.abs(backlund.sg_residual(sg.field, g.hu, g.hv)))),
                float(np.max(np.abs(backlund.liouville_residual(lv.field, h.hu, h.hv)))))

    (kerr, sres, lres), el = _timed(run)
    ok = kerr <= 1e-8 and sres <= 1e-6 and lres <= 1e-6
    assert _line(capsys, 6, ok, f"sine-Gordon kink {kerr:.1e}, residual {sres:.1e}; Liouville residual "
                                f"{lres:.1e}", el, 10.0)


def test_7_sdym(capsys):
    def run():
        exact = sdym.exact_involution_residual(100)
        sweep = sdym.equivalence_sweep(1000)
        gI = np.broadcast_to(np.eye(2, dtype=complex), (7, 7, 7, 7, 2, 2))
        yI = float(np.max(np.abs(sdym.yang_residual(gI, (0.1,) * 4))))
        gh, h = sdym.harmonic_example()
        yh = float(np.max(np.abs(sdym.yang_residual(gh, h))))
        return exact, sweep, yI, yh

    (exact, sweep, yI, yh), el = _timed(run)
    ok = exact == 0.0 and sweep["equiv_gap"] <= 1e-12 and sweep["iff"] and yI == 0.0 and yh <= 1e-2
    assert _line(capsys, 7, ok, f"SDYM ⋆⋆ - id {exact:g}, gap {sweep['equiv_gap']:.1e} over 1000 draws, "
                                f"Yang I {yI:g}, harmonic {yh:.2e} (≤1e-2)", el, 10.0)


def test_8_heavenly(capsys):
    def run():
        g = heavenly.flat_grid(17)
        flat = float(np.max(np.abs(heavenly.heavenly_residual(
            heavenly.HeavenlyConfig(g, heavenly.flat_solution(g))))))
        return flat, heavenly.refinement_study((9, 13, 17), 2)

    (flat, study), el = _timed(run)
    lv1, lv2 = study["levels"]
    ok1 = lv1["at_roundoff"] or abs(lv1["order"] - 2) <= 0.2
    ok2 = lv2["order"] is not None and abs(lv2["order"] - 2) <= 0.2
    desc = [f"level {lv['m']} " + ("at roundoff" if lv["at_roundoff"] else f"order {lv['order']:.3f}")
            for lv in (lv1, lv2)]
    assert _line(capsys, 8, flat == 0.0 and ok1 and ok2,
                 f"heavenly flat residual {flat:g}; {', '.join(desc)} up to 17⁴", el, 60.0)


def test_9_kdv(capsys):
    def run():
        return kp.kp_conservation_check(kp.soliton_run(512, 40.0, 1.0, 1e-3, 10.0, 100), M=3)

    s, el = _timed(run)
    drifts = [float(np.max(s.relative[:, m])) for m in range(4)]
    tols = [1e-10, 1e-8, 1e-6, 1e-5]
    ok = all(d <= t for d, t in zip(drifts, tols))
    assert _line(capsys, 9, ok, "KdV drifts " + ", ".join(f"Q{m} {d:.1e}" for m, d in enumerate(drifts)),
                 el, 60.0)

