import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from bitower import cli
from bitower.selftest import SELFTESTS

COMMANDS = ["axioms", "toda", "chiral", "chiral3d", "kp-densities", "kp-conserve", "backlund-sg",
            "backlund-liouville", "sdym", "heavenly"]


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_every_subcommand_has_a_selftest():
    assert set(SELFTESTS) == set(COMMANDS)


@pytest.mark.parametrize("cmd", COMMANDS)
def test_selftest_passes(capsys, cmd):
    code, out, _ = run(capsys, cmd, "--selftest")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines and all(line.startswith("PASS ") for line in lines)


def test_kp_densities_text_starts_with_phi0(capsys):
    code, out, _ = run(capsys, "kp-densities", "--order", "3", "--format", "text")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "φ⁽⁰⁾_x = −u"
    assert len(lines) == 4


def test_kp_densities_sexpr_round_trips(capsys):
    from bitower import diffpoly as dp
    code, out, _ = run(capsys, "kp-densities", "--order", "2", "--format", "sexpr")
    assert code == 0
    got = [dp.from_sexpr(line) for line in out.splitlines()]
    assert got == dp.kp_density_recursion(2)


def test_unknown_flag_is_a_usage_error(capsys):
    code, _, err = run(capsys, "toda", "--no-such-flag")
    assert code == 2
    assert "usage" in err


def test_bad_values_are_usage_errors(capsys):
    assert run(capsys, "toda", "--dt", "-1")[0] == 2
    assert run(capsys, "backlund-sg", "--lambda", "0")[0] == 2
    assert run(capsys, "nope")[0] == 2
    assert run(capsys)[0] == 2
    assert run(capsys, "kp-conserve", "--order", "3", "--tols", "1e-3")[0] == 2


def test_toda_short_run_csv(tmp_path, capsys):
    out = tmp_path / "toda.csv"
    code, text, _ = run(capsys, "toda", "--sites", "32", "--steps", "200", "--record-every", "50",
                        "--out", str(out))
    assert code == 0
    assert "PASS drift≤1e-6" in text
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["step", "t", "Q1", "Q2", "Q3", "momentum", "energy", "cubic_combo",
                       "edge_check_max_abs_diff"]
    assert [r[0] for r in rows[1:]] == ["0", "50", "100", "150", "200"]
    # 17 significant digits round-trip
    v = float(rows[2][2])
    assert format(v, ".17g") == rows[2][2]


def test_toda_tolerance_failure_exit_code(capsys):
    code, text, _ = run(capsys, "toda", "--sites", "32", "--steps", "100", "--tol", "1e-30")
    assert code == 1
    assert text.startswith("FAIL drift")


def test_output_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert run(capsys, "toda", "--sites", "16", "--steps", "50", "--out", str(p))[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_spec_file_mirrors_flags(tmp_path, capsys):
    spec = tmp_path / "run.json"
    spec.write_text(json.dumps({"sites": 16, "steps": 40, "record-every": 20}))
    out = tmp_path / "s.csv"
    code, _, _ = run(capsys, "toda", "--spec", str(spec), "--out", str(out))
    assert code == 0
    assert len(out.read_text().splitlines()) == 4
    spec.write_text(json.dumps({"sites": 16, "steps": 40, "record-every": 20}))
    code, _, _ = run(capsys, "toda", "--spec", str(spec), "--record-every", "40", "--out", str(out))
    assert len(out.read_text().splitlines()) == 3
    spec.write_text(json.dumps({"bogus": 1}))
    assert run(capsys, "toda", "--spec", str(spec))[0] == 2
    spec.write_text("{not json")
    assert run(capsys, "toda", "--spec", str(spec))[0] == 2


def test_json_check_schema_and_dump(tmp_path, capsys):
    js, dump = tmp_path / "r.json", tmp_path / "f.csv"
    code, _, _ = run(capsys, "backlund-sg", "--points", "41", "--json", str(js), "--dump", str(dump))
    assert code in (0, 1)
    checks = json.loads(js.read_text())["checks"]
    assert all(set(c) == {"check", "max_residual", "tolerance", "pass"} for c in checks)
    head = dump.read_text().splitlines()
    assert head[0] == "u,v,value" and len(head) == 41 * 41 + 1


def test_sdym_json_schema(tmp_path, capsys):
    js = tmp_path / "s.json"
    code, _, _ = run(capsys, "sdym", "--draws", "50", "--harmonic-points", "9", "--fd-tol", "1", "--json", str(js))
    assert code == 0
    data = json.loads(js.read_text())
    assert {"unmixed_res", "mixed_sym_res", "selfdual_res", "equiv_gap"} <= set(data)


def test_heavenly_json_levels(tmp_path, capsys):
    js = tmp_path / "h.json"
    code, _, _ = run(capsys, "heavenly", "--ns", "9,13", "--flat-points", "9", "--json", str(js))
    assert code == 0
    levels = json.loads(js.read_text())["levels"]
    assert [lv["m"] for lv in levels] == [1, 2]
    assert all({"m", "conservation_residual", "primitive_residual"} <= set(lv) for lv in levels)


def test_chiral_csv_columns(tmp_path, capsys):
    out = tmp_path / "c.csv"
    code, _, _ = run(capsys, "chiral", "--points", "512", "--t-end", "0.5", "--record-every", "5",
                     "--out", str(out))
    assert code == 0
    header = out.read_text().splitlines()[0].split(",")
    assert header[:4] == ["step", "t", "Q1[0][0].re", "Q1[0][0].im"]
    assert header[-1] == "Q2[1][1].im" and len(header) == 2 + 16


def test_kp_conserve_csv_columns(tmp_path, capsys):
    out = tmp_path / "k.csv"
    code, _, _ = run(capsys, "kp-conserve", "--points", "256", "--dt", "2e-3", "--t-end", "0.2",
                     "--record-every", "50", "--out", str(out))
    assert code == 0
    header = out.read_text().splitlines()[0].split(",")
    assert header == ["step", "t", "Q0", "Q1", "Q2", "Q3", "relative_drift_0", "relative_drift_1",
                      "relative_drift_2", "relative_drift_3"]


def test_numeric_failure_exit_code(capsys):
    code, _, err = run(capsys, "kp-conserve", "--points", "256", "--dt", "0.05", "--t-end", "5")
    assert code == 3
    assert "numeric failure" in err


def test_module_entry_point_and_thread_variable():
    env = dict(os.environ, BITOWER_THREADS="1")
    src = os.path.join(os.path.dirname(__file__), os.pardir, "src")
    env["PYTHONPATH"] = os.path.abspath(src) + os.pathsep + env.get("PYTHONPATH", "")
    r = subprocess.run([sys.executable, "-m", "bitower", "kp-densities", "--order", "0"],
                       capture_output=True, text=True, env=env)
    assert r.returncode == 0 and r.stdout.strip() == "φ⁽⁰⁾_x = −u"
    env["BITOWER_THREADS"] = "zero"
    r = subprocess.run([sys.executable, "-m", "bitower", "kp-densities"], capture_output=True, text=True, env=env)
    assert r.returncode == 2


def test_tolstr():
    assert cli.tolstr(1e-6) == "1e-6"
    assert cli.tolstr(0.0) == "0"
    assert np.isclose(float(cli.tolstr(2.5e-7)), 2.5e-7)
