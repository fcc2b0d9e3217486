"""Command line entry point: one scenario per subcommand.

Exit codes: 0 all checks pass, 1 a tolerance check failed, 2 usage error,
3 numeric failure.  ``--spec file.json`` supplies flag values by name (dashes or
underscores); flags given on the command line override it.
"""

from __future__ import annotations

import os

# BITOWER_THREADS caps the BLAS/OpenMP pools; it has to be in place before numpy loads.
_THREADS = os.environ.get("BITOWER_THREADS")
if _THREADS and _THREADS.isdigit() and int(_THREADS) > 0:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _THREADS)

import argparse  # noqa: E402
import csv  # noqa: E402
import json  # noqa: E402
import sys  # noqa: E402
import time  # noqa: E402

import numpy as np  # noqa: E402

from . import axioms as ax  # noqa: E402
from . import diffpoly as dp  # noqa: E402
from . import numgrid  # noqa: E402
from .algebra import CheckResult  # noqa: E402
from .errors import NumericFailure, TowerError  # noqa: E402
from .models import backlund, chiral, heavenly, kp, sdym, toda  # noqa: E402
from .selftest import SELFTESTS  # noqa: E402

EXIT_OK, EXIT_TOL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


# -- argument types ------------------------------------------------------------


def _positive(kind):
    def conv(text):
        try:
            v = kind(text)
        except (TypeError, ValueError):
            raise argparse.ArgumentTypeError(f"expected a {kind.__name__}, got {text!r}")
        if not v > 0:
            raise argparse.ArgumentTypeError(f"expected a positive value, got {text!r}")
        return v
    conv.__name__ = f"positive {kind.__name__}"
    return conv


pos_int = _positive(int)
pos_float = _positive(float)


def _nonzero_float(text):
    v = float(text)
    if v == 0:
        raise argparse.ArgumentTypeError("value must be nonzero")
    return v


def _int_list(text):
    try:
        out = [int(s) for s in str(text).split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not out or min(out) < 5:
        raise argparse.ArgumentTypeError("grid sizes must be at least 5")
    return out


def _float_list(text):
    try:
        return [float(s) for s in str(text).split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def tolstr(x: float) -> str:
    """Short form of a tolerance: 1e-06 becomes 1e-6 and 0.0001 becomes 1e-4."""
    if x == 0 or 1e-3 <= abs(x) < 1e4:
        return f"{x:g}"
    mant, exp = f"{x:e}".split("e")
    mant = mant.rstrip("0").rstrip(".")
    return f"{mant}e{int(exp)}"


fmt = numgrid.fmt


# -- output helpers ---------------------------------------------------------------


def _open_out(path):
    return sys.stdout if path == "-" else open(path, "w", newline="", encoding="utf-8")


def write_csv(path, header, rows):
    if path is None:
        return
    fh = _open_out(path)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([v if isinstance(v, (int, np.integer, str)) else fmt(v) for v in r])
    finally:
        if fh is not sys.stdout:
            fh.close()


def write_json(path, obj):
    if path is None:
        return
    text = json.dumps(obj, indent=2, allow_nan=True)
    if path == "-":
        print(text)
        return
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text + "\n")


def dump_field(path, field):
    if path is not None:
        numgrid.field_to_csv(field, path)


def report(checks, out=None) -> int:
    """Print one PASS/FAIL line per check; returns the exit code."""
    out = sys.stdout if out is None else out
    for c in checks:
        tag = "PASS" if c.passed else "FAIL"
        print(f"{tag} {c.check}≤{tolstr(c.tolerance)} (max {c.max_residual:.3e})", file=out)
    return EXIT_OK if all(c.passed for c in checks) else EXIT_TOL


def checks_json(checks) -> list:
    return [c.to_json() for c in checks]


# -- subcommands --------------------------------------------------------------------


def cmd_axioms(a) -> int:
    checks = []
    for name, rep in ax.lattice_reports(a.seed).items():
        for c in rep.checks:
            checks.append(CheckResult(f"{name} {c.check}", c.max_residual, c.tolerance))
    conv = ax.chiral_convergence(tuple(a.ns))
    # an order check is reported as a shortfall below the required order
    checks.append(CheckResult(f"{conv.check} order shortfall", max(0.0, a.min_order - conv.order), 0.0))
    print(f"continuum order {conv.order:.3f} (required {a.min_order:g})")
    write_json(a.json, {"checks": checks_json(checks), "convergence": conv.to_json()})
    return report(checks)


def cmd_toda(a) -> int:
    if a.charges < 1:
        raise UsageError("--charges must be at least 1")
    state = toda.gaussian_pulse(a.sites, a.amplitude, width=a.width)
    traj = toda.integrate_toda(state, a.dt, a.steps, a.record_every)
    ser = toda.toda_charges(traj, a.charges)
    steps = np.rint(traj.times / a.dt).astype(int)
    header = ["step", "t"] + [f"Q{m}" for m in range(1, a.charges + 1)] + \
        ["momentum", "energy", "cubic_combo", "edge_check_max_abs_diff"]
    rows = ([int(steps[i]), traj.times[i], *ser.Q[i], ser.momentum[i], ser.energy[i], ser.cubic[i],
             ser.edge_check[i]] for i in range(traj.times.size))
    write_csv(a.out, header, rows)
    dump_field(a.dump, numgrid.SampledField(
        numgrid.Grid((numgrid.Axis("k", 0.0, 1.0, a.sites, lattice=True),)), traj.q[-1]))
    drift = max(float(np.max(ser.drift(m))) for m in range(1, a.charges + 1))
    edge = float(np.max(ser.edge_check))
    if ser.warned:
        print("warning: the pulse reached the window edge", file=sys.stderr)
    checks = [CheckResult("drift", drift, a.tol), CheckResult("edge", edge, a.edge_tol)]
    write_json(a.json, {"checks": checks_json(checks)})
    return report(checks)


def _matrix_cols(prefix, N):
    return [f"{prefix}[{i}][{j}].{p}" for i in range(N) for j in range(N) for p in ("re", "im")]


def _flat_complex(m):
    return [c for v in np.ravel(m) for c in (v.real, v.imag)]


def cmd_chiral(a) -> int:
    traj = chiral.su2_run(a.points, a.t_end, a.cfl, a.record_every, half_width=a.half_width,
                          amplitude=a.amplitude, width=a.width, kick=a.kick)
    ser = chiral.chiral_charges(traj, M=2)
    dt = a.t_end / max(1, int(round(a.t_end / (a.cfl * traj.dx))))
    N = traj.g.shape[-1]
    header = ["step", "t"] + _matrix_cols("Q1", N) + _matrix_cols("Q2", N)
    rows = ([int(round(t / dt)), t, *_flat_complex(ser.Q[i, 0]), *_flat_complex(ser.Q[i, 1])]
            for i, t in enumerate(traj.times))
    write_csv(a.out, header, rows)
    dump_field(a.dump, numgrid.SampledField(
        numgrid.Grid((numgrid.Axis("x", float(traj.x[0]), traj.dx, traj.x.size),)), traj.g[-1]))
    checks = [CheckResult("Q1 drift", float(np.max(ser.drift(1))), a.tol),
              CheckResult("Q2 drift", float(np.max(ser.drift(2))), a.tol),
              CheckResult("tower Q2 vs closed form", ser.q2_gap, a.gap_tol)]
    write_json(a.json, {"checks": checks_json(checks)})
    return report(checks)


def cmd_chiral3d(a) -> int:
    t, x, y, g, ag, bg = chiral.abelian3d_example(nt=7, nx=a.nx, ny=a.ny, ht=a.ht)
    res = chiral.chiral3d_residual(g, a.ht, x[1] - x[0], y[1] - y[0])
    ser = chiral.chiral3d_charges(ag, bg, x[1] - x[0], y[1] - y[0], M=2)
    interior = np.max(np.abs(res[2:-2]))
    checks = [CheckResult("3D residual", float(interior), a.tol),
              CheckResult("tower Q2 vs closed form", ser.q2_gap, a.gap_tol),
              CheckResult("Q1 drift", float(np.max(ser.drift(1))), a.drift_tol)]
    write_json(a.json, {"checks": checks_json(checks)})
    return report(checks)


_SUPS = str.maketrans("0123456789", "⁰¹²³⁴⁵⁶⁷⁸⁹")


def cmd_kp_densities(a) -> int:
    dens = dp.kp_density_recursion(a.order)
    if a.format == "text":
        for m, p in enumerate(dens):
            print(f"φ⁽{str(m).translate(_SUPS)}⁾_x = " + dp.pretty(p).replace("-", "−"))
    elif a.format == "sexpr":
        for p in dens:
            print(dp.to_sexpr(p))
    else:
        print(json.dumps([{"m": m, "text": dp.pretty(p), "sexpr": dp.to_sexpr(p)}
                          for m, p in enumerate(dens)], indent=2, ensure_ascii=False))
    return EXIT_OK


def cmd_kp_conserve(a) -> int:
    tols = a.tols
    if len(tols) < a.order + 1:
        raise UsageError(f"--tols needs {a.order + 1} values for --order {a.order}")
    traj = kp.soliton_run(a.points, a.length, a.kappa, a.dt, a.t_end, a.record_every)
    ser = kp.kp_conservation_check(traj, M=a.order)
    rel = ser.relative
    M1 = a.order + 1
    header = ["step", "t"] + [f"Q{m}" for m in range(M1)] + [f"relative_drift_{m}" for m in range(M1)]
    rows = ([int(ser.steps[i]), ser.times[i], *ser.Q[i], *rel[i]] for i in range(ser.times.size))
    write_csv(a.out, header, rows)
    dump_field(a.dump, numgrid.SampledField(traj.grid(), traj.u[-1]))
    checks = [CheckResult(f"Q{m} drift", float(np.max(rel[:, m])), tols[m]) for m in range(M1)]
    write_json(a.json, {"checks": checks_json(checks)})
    return report(checks)


def cmd_backlund_sg(a) -> int:
    res, exact = backlund.sg_kink_scenario(a.points, a.half_width, a.lam, a.corner)
    g = res.grid
    checks = [CheckResult("kink error", float(np.max(np.abs(res.field - exact))), a.kink_tol),
              CheckResult("sine-Gordon residual", float(np.max(np.abs(backlund.sg_residual(res.field, g.hu, g.hv)))),
                          a.tol),
              CheckResult("integration order gap", res.cross_gap, a.tol)]
    dump_field(a.dump, numgrid.SampledField(g.grid(), res.field))
    write_json(a.json, {"checks": checks_json(checks)})
    return report(checks)


def cmd_backlund_liouville(a) -> int:
    res, exact = backlund.liouville_scenario(a.points, a.lo, a.hi, a.lam, a.corner)
    g = res.grid
    checks = [CheckResult("Liouville residual",
                          float(np.max(np.abs(backlund.liouville_residual(res.field, g.hu, g.hv)))), a.tol),
              CheckResult("closed-form error", float(np.max(np.abs(res.field - exact))), a.exact_tol),
              CheckResult("integration order gap", res.cross_gap, a.tol)]
    dump_field(a.dump, numgrid.SampledField(g.grid(), res.field))
    write_json(a.json, {"checks": checks_json(checks)})
    return report(checks)


def cmd_sdym(a) -> int:
    sweep = sdym.equivalence_sweep(a.draws, a.n, a.matrix_size, a.seed)
    exact = sdym.exact_involution_residual(min(a.draws, 100), a.n, a.seed)
    gI = np.broadcast_to(np.eye(2, dtype=complex), (7, 7, 7, 7, 2, 2))
    y_id = float(np.max(np.abs(sdym.yang_residual(gI, (0.1,) * 4))))
    gh, h = sdym.harmonic_example(a.harmonic_points, a.harmonic_half_width)
    yres = sdym.yang_residual(gh, h)
    y_h = float(np.max(np.abs(yres)))
    checks = [CheckResult("star star - id (exact arithmetic)", exact, 0.0),
              CheckResult("equivalence gap", sweep["equiv_gap"], a.gap_tol),
              CheckResult("self-dual draws", max(sweep["selfdual_res"], sweep["mixed_sym_res"]), a.gap_tol),
              CheckResult("iff over draws", 0.0 if sweep["iff"] else 1.0, 0.0),
              CheckResult("Yang residual g = I", y_id, 0.0),
              CheckResult("Yang residual harmonic", y_h, a.fd_tol)]
    if a.dump:
        n = a.harmonic_points
        st = h[0]
        lo = -a.harmonic_half_width
        grid = numgrid.Grid(tuple(numgrid.Axis(nm, lo, st, n) for nm in ("y1", "y2", "z1", "z2")))
        dump_field(a.dump, numgrid.SampledField(grid, yres[..., 0, 0]))
    out = {k: sweep[k] for k in ("unmixed_res", "mixed_sym_res", "selfdual_res", "equiv_gap")}
    out.update(draws=a.draws, star_star_exact=exact, yang_identity=y_id, yang_harmonic=y_h,
               checks=checks_json(checks))
    write_json(a.json, out)
    return report(checks)


def cmd_heavenly(a) -> int:
    g = heavenly.flat_grid(a.flat_points)
    flat = float(np.max(np.abs(heavenly.heavenly_residual(heavenly.HeavenlyConfig(g, heavenly.flat_solution(g))))))
    study = heavenly.refinement_study(tuple(a.ns), a.levels)
    checks = [CheckResult("flat residual", flat, 0.0)]
    for lv in study["levels"]:
        if lv["at_roundoff"]:
            checks.append(CheckResult(f"level {lv['m']} conservation (closed at roundoff)",
                                      lv["conservation_residual"], heavenly.ROUNDOFF))
        else:
            checks.append(CheckResult(f"level {lv['m']} order deviation from 2", abs(lv["order"] - 2.0),
                                      a.order_tol))
        print(f"level {lv['m']}: residuals {', '.join(f'{r:.3e}' for r in lv['residuals'])}"
              + ("" if lv["order"] is None else f", order {lv['order']:.3f}"))
    if a.dump:
        dump_field(a.dump, numgrid.SampledField(g, heavenly.dressed_solution(g)))
    write_json(a.json, {"flat_residual": flat,
                        "levels": [{k: lv[k] for k in ("m", "conservation_residual", "primitive_residual",
                                                        "order")} for lv in study["levels"]],
                        "steps": study["steps"], "checks": checks_json(checks)})
    return report(checks)


# -- parser -------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser, csv_out: bool = False, dump: bool = True):
    p.add_argument("--selftest", action="store_true", help="run the trivial-case checks only")
    p.add_argument("--spec", metavar="FILE", help="JSON object of flag values")
    p.add_argument("--json", metavar="PATH", help="write a JSON report ('-' for stdout)")
    if csv_out:
        p.add_argument("--out", metavar="PATH", help="CSV time series ('-' for stdout)")
    if dump:
        p.add_argument("--dump", metavar="PATH", help="write the final field as CSV")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bitower", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version="bitower 0.1.0")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("axioms", help="bicomplex axiom checks")
    _common(p, dump=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ns", type=_int_list, default=[16, 32, 64, 128], help="continuum grid sizes")
    p.add_argument("--min-order", type=pos_float, default=1.9)
    p.set_defaults(func=cmd_axioms)

    p = sub.add_parser("toda", help="Toda lattice pulse run and charges")
    _common(p, csv_out=True)
    p.add_argument("--sites", type=pos_int, default=64)
    p.add_argument("--dt", type=pos_float, default=1e-3)
    p.add_argument("--steps", type=pos_int, default=10000)
    p.add_argument("--charges", type=pos_int, default=3)
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--width", type=pos_float, default=3.0)
    p.add_argument("--record-every", type=pos_int, default=1)
    p.add_argument("--tol", type=pos_float, default=1e-6)
    p.add_argument("--edge-tol", type=pos_float, default=1e-12)
    p.set_defaults(func=cmd_toda)

    p = sub.add_parser("chiral", help="SU(2) chiral pulse run and nonlocal charges")
    _common(p, csv_out=True)
    p.add_argument("--points", type=pos_int, default=512)
    p.add_argument("--t-end", type=pos_float, default=5.0)
    p.add_argument("--cfl", type=pos_float, default=0.25)
    p.add_argument("--record-every", type=pos_int, default=1)
    p.add_argument("--half-width", type=pos_float, default=12.0)
    p.add_argument("--amplitude", type=float, default=0.6)
    p.add_argument("--width", type=pos_float, default=1.5)
    p.add_argument("--kick", type=float, default=0.5)
    p.add_argument("--tol", type=pos_float, default=1e-4)
    p.add_argument("--gap-tol", type=pos_float, default=1e-12)
    p.set_defaults(func=cmd_chiral)

    p = sub.add_parser("chiral3d", help="3D chiral residual and charge checks on an exact solution")
    _common(p, dump=False)
    p.add_argument("--nx", type=pos_int, default=64)
    p.add_argument("--ny", type=pos_int, default=48)
    p.add_argument("--ht", type=pos_float, default=0.1)
    p.add_argument("--tol", type=pos_float, default=1e-2)
    p.add_argument("--gap-tol", type=pos_float, default=1e-12)
    p.add_argument("--drift-tol", type=pos_float, default=1e-3)
    p.set_defaults(func=cmd_chiral3d)

    p = sub.add_parser("kp-densities", help="print the symbolic KP conserved densities")
    _common(p, dump=False)
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--format", choices=("text", "sexpr", "json"), default="text")
    p.set_defaults(func=cmd_kp_densities)

    p = sub.add_parser("kp-conserve", help="KdV soliton run and density conservation")
    _common(p, csv_out=True)
    p.add_argument("--points", type=pos_int, default=512)
    p.add_argument("--length", type=pos_float, default=40.0)
    p.add_argument("--kappa", type=pos_float, default=1.0)
    p.add_argument("--dt", type=pos_float, default=1e-3)
    p.add_argument("--t-end", type=pos_float, default=10.0)
    p.add_argument("--record-every", type=pos_int, default=100)
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--tols", type=_float_list, default=[1e-10, 1e-8, 1e-6, 1e-5])
    p.set_defaults(func=cmd_kp_conserve)

    p = sub.add_parser("backlund-sg", help="sine-Gordon Backlund transform of the vacuum")
    _common(p)
    p.add_argument("--points", type=pos_int, default=201)
    p.add_argument("--half-width", type=pos_float, default=1.0)
    p.add_argument("--lambda", dest="lam", type=_nonzero_float, default=1.0)
    p.add_argument("--corner", type=float, default=1.0)
    p.add_argument("--kink-tol", type=pos_float, default=1e-8)
    p.add_argument("--tol", type=pos_float, default=1e-6)
    p.set_defaults(func=cmd_backlund_sg)

    p = sub.add_parser("backlund-liouville", help="Liouville solution from a free-wave seed")
    _common(p)
    p.add_argument("--points", type=pos_int, default=201)
    p.add_argument("--lo", type=float, default=0.0)
    p.add_argument("--hi", type=float, default=1.0)
    p.add_argument("--lambda", dest="lam", type=_nonzero_float, default=-1.0)
    p.add_argument("--corner", type=float, default=-1.0)
    p.add_argument("--tol", type=pos_float, default=1e-6)
    p.add_argument("--exact-tol", type=pos_float, default=1e-8)
    p.set_defaults(func=cmd_backlund_liouville)

    p = sub.add_parser("sdym", help="self-duality star checks and Yang residuals")
    _common(p)
    p.add_argument("--draws", type=pos_int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=pos_int, default=2)
    p.add_argument("--matrix-size", type=pos_int, default=2)
    p.add_argument("--harmonic-points", type=pos_int, default=17)
    p.add_argument("--harmonic-half-width", type=pos_float, default=0.5)
    p.add_argument("--gap-tol", type=pos_float, default=1e-12)
    p.add_argument("--fd-tol", type=pos_float, default=1e-2)
    p.set_defaults(func=cmd_sdym)

    p = sub.add_parser("heavenly", help="heavenly equation residual and tower refinement study")
    _common(p)
    p.add_argument("--flat-points", type=pos_int, default=17)
    p.add_argument("--ns", type=_int_list, default=[9, 13, 17])
    p.add_argument("--levels", type=pos_int, default=2)
    p.add_argument("--order-tol", type=pos_float, default=0.2)
    p.set_defaults(func=cmd_heavenly)
    return parser


def _subparser(parser, name):
    for act in parser._actions:
        if isinstance(act, argparse._SubParsersAction):
            return act.choices.get(name)
    return None


def _apply_spec(parser, argv, args):
    """Re-parse with values from ``--spec`` FILE as defaults of the chosen subcommand."""
    sp = _subparser(parser, args.command)
    try:
        with open(args.spec, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read spec file {args.spec!r}: {exc}")
    if not isinstance(data, dict):
        raise UsageError("a spec file must hold a JSON object")
    known = {a.dest: a for a in sp._actions}
    defaults = {}
    for key, value in data.items():
        dest = key.lstrip("-").replace("-", "_")
        if dest == "lambda":
            dest = "lam"
        if dest not in known or dest in ("help", "spec"):
            raise UsageError(f"unknown key {key!r} in spec file")
        act = known[dest]
        if act.type is not None and not isinstance(value, bool):
            try:
                value = act.type(",".join(map(str, value)) if isinstance(value, list) else str(value))
            except argparse.ArgumentTypeError as exc:
                raise UsageError(f"spec key {key!r}: {exc}")
        defaults[dest] = value
    sp.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if _THREADS and not (_THREADS.isdigit() and int(_THREADS) > 0):
        print(f"error: BITOWER_THREADS must be a positive integer, got {_THREADS!r}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.spec:
            args = _apply_spec(parser, argv, args)
        start = time.perf_counter()
        if args.selftest:
            code = report(SELFTESTS[args.command]())
        else:
            code = args.func(args)
        print(f"elapsed {time.perf_counter() - start:.2f} s", file=sys.stderr)
        return code
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    except (NumericFailure, FloatingPointError, OverflowError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except TowerError as exc:
        print(f"FAIL {exc}")
        return EXIT_TOL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
