from __future__ import annotations

import csv
import io
import json
import math

import numpy as np
import pytest

from npg2 import tables
from npg2.cli import SUMMARY_KEYS, SWEEP_COLUMNS, derivative_5pt, main, oracle_table, transform_table


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize("name", ["sine_cone", "round_sphere", "squashed_sphere"])
def test_oracle_check_passes(capsys, name):
    code, out, _ = run(capsys, "oracle-check", name)
    assert code == 0 and "max_residual=" in out


def test_oracle_check_unknown_name(capsys):
    code, _, err = run(capsys, "oracle-check", "torus")
    assert code == 2 and "usage error" in err


def test_oracle_check_fails_at_tiny_tol(capsys):
    code, _, _ = run(capsys, "oracle-check", "round_sphere", "--tol", "1e-30")
    assert code == 1


def test_solve_json_schema(capsys, tmp_path):
    csv_path = tmp_path / "r.csv"
    code, out, _ = run(capsys, "solve", "--a", -36, "--t-max", 12, "--samples", 2000,
                       "--out", csv_path)
    assert code == 0
    doc = json.loads(out)
    assert tuple(doc) == SUMMARY_KEYS
    assert doc["termination"]["kind"] == "h0_zero"
    assert doc["t_star"] == pytest.approx(2 * math.pi, abs=1e-5)
    assert doc["classification"] == "round_like"
    assert doc["closing_report"]["verdict"] == "closes_within_tol"
    table = tables.read(csv_path)
    assert table.footer["termination"].startswith("h0_zero")
    assert float(table.footer["a"]) == -36.0


def test_solve_json_file(capsys, tmp_path):
    jp = tmp_path / "s.json"
    code, out, _ = run(capsys, "solve", "--a", 10, "--t-max", 0.5, "--json", jp)
    assert code == 0 and out == ""
    doc = json.loads(jp.read_text())
    assert doc["classification"] == "generic" and doc["closing_report"] is None


@pytest.mark.parametrize("argv", [["solve", "--a", "0"], ["solve"],
                                  ["solve", "--a", "1", "--t-max", "-1"],
                                  ["solve", "--a", "1", "--series-order", "3"]])
def test_solve_usage_errors(capsys, argv):
    assert run(capsys, *argv)[0] == 2


def test_sweep_output(capsys, tmp_path):
    out = tmp_path / "sw.csv"
    code, _, _ = run(capsys, "sweep", "--a-from", 1, "--a-to", 4, "--steps", 4,
                     "--t-max", 0.5, "--samples", 50, "--out", out)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert tuple(rows[0]) == SWEEP_COLUMNS
    assert [float(r["a"]) for r in rows] == [1.0, 2.0, 3.0, 4.0]
    assert all(r["termination"].startswith("reached_t_max") for r in rows)
    assert all(float(r["max_drift"]) < 1e-8 for r in rows)


def test_sweep_parallel_matches_serial(capsys):
    argv = ["sweep", "--a-from", 2, "--a-to", 3, "--steps", 2, "--t-max", 0.3, "--samples", 20]
    c1, o1, _ = run(capsys, *argv)
    c2, o2, _ = run(capsys, *argv, "--jobs", 2)
    assert c1 == c2 == 0 and o1 == o2


def test_sweep_zero_crossing(capsys):
    argv = ["sweep", "--a-from", -1, "--a-to", 1, "--steps", 3, "--t-max", 0.3,
            "--samples", 20]
    assert run(capsys, *argv)[0] == 2
    code, out, _ = run(capsys, *argv, "--split")
    assert code == 0
    assert [float(r["a"]) for r in csv.DictReader(io.StringIO(out))] == [-1.0, 1.0]


def test_sweep_bad_steps(capsys):
    assert run(capsys, "sweep", "--a-from", 1, "--a-to", 2, "--steps", 0)[0] == 2


@pytest.fixture
def round_csv(tmp_path):
    p = tmp_path / "round.csv"
    tables.write(p, oracle_table("round_sphere", 400))
    return p


def test_transform_12_swaps_columns(capsys, round_csv, tmp_path):
    out = tmp_path / "t12.csv"
    assert run(capsys, "transform", round_csv, "--tau", "12", "--out", out)[0] == 0
    a, b = tables.read(round_csv), tables.read(out)
    assert np.array_equal(b.F, a.F[:, [0, 2, 1, 4, 3]] * [-1, 1, 1, 1, 1])
    assert np.array_equal(b.t, a.t)
    # applying tau_12 twice is the identity exactly
    out2 = tmp_path / "t12x2.csv"
    run(capsys, "transform", out, "--tau", "12", "--out", out2)
    assert out2.read_text() == round_csv.read_text()


def test_transform_o_reverses_time(round_csv):
    a = tables.read(round_csv)
    b = transform_table(a, "o")
    assert np.array_equal(b.t, -a.t[::-1])
    assert np.all(np.diff(b.t) > 0)
    assert transform_table(b, "o").rows.tobytes() == a.rows.tobytes()


def test_transform_13_twice_within_rounding(round_csv):
    a = tables.read(round_csv)
    b = transform_table(transform_table(a, "13"), "13")
    scale = np.abs(a.F).max(axis=1, keepdims=True)
    # two roundings of a signed sum: a few ulp of the row scale
    assert (np.abs(b.F - a.F) / scale).max() <= 4 * np.finfo(float).eps


def test_transform_usage_errors(capsys, round_csv, tmp_path):
    assert run(capsys, "transform", round_csv, "--tau", "99")[0] == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("t,x\n1,2\n")
    assert run(capsys, "transform", bad, "--tau", "12")[0] == 2
    assert run(capsys, "transform", tmp_path / "missing.csv", "--tau", "12")[0] == 2


@pytest.mark.parametrize("tau", ["12", "13", "23", "123", "132", "o"])
def test_residual_of_transformed_oracle(capsys, round_csv, tmp_path, tau):
    out = tmp_path / "t.csv"
    run(capsys, "transform", round_csv, "--tau", tau, "--out", out)
    code, text, _ = run(capsys, "residual", out)
    assert code == 0
    assert float(text.split("max_residual=")[1].split()[0]) < 1e-6


def test_residual_tau12_tight(capsys, tmp_path):
    # the finite-difference error is below 1e-9 at N = 1000
    src, out = tmp_path / "r.csv", tmp_path / "t.csv"
    tables.write(src, oracle_table("round_sphere", 1000))
    run(capsys, "transform", src, "--tau", "12", "--out", out)
    assert run(capsys, "residual", out, "--tol", "1e-9")[0] == 0


def test_residual_detects_corruption(capsys, round_csv, tmp_path):
    t = tables.read(round_csv)
    t.rows[200, 3] *= 1 + 1e-3
    bad = tmp_path / "bad.csv"
    tables.write(bad, t)
    assert run(capsys, "residual", bad)[0] == 1


def test_residual_short_table(capsys, round_csv, tmp_path):
    t = tables.read(round_csv)
    short = tmp_path / "short.csv"
    tables.write(short, tables.TrajectoryTable(t.rows[:3], t.footer))
    assert run(capsys, "residual", short)[0] == 2


def test_residual_needs_lambda(capsys, round_csv, tmp_path):
    t = tables.read(round_csv)
    p = tmp_path / "nolam.csv"
    tables.write(p, tables.TrajectoryTable(t.rows, {}))
    assert run(capsys, "residual", p)[0] == 2
    assert run(capsys, "residual", p, "--lambda", 4)[0] == 0


def test_csv_round_trip_is_byte_identical(capsys, tmp_path):
    p = tmp_path / "s.csv"
    run(capsys, "solve", "--a", 21.6, "--t-max", 1, "--samples", 100, "--out", p)
    text = p.read_text()
    assert tables.dumps(tables.loads(text)) == text


def test_loads_rejects_non_monotone_time():
    text = ",".join(tables.HEADER) + "\n" + "\n".join(
        ",".join(["%g" % t] + ["1"] * 10) for t in (0.1, 0.3, 0.2)) + "\n"
    with pytest.raises(tables.MalformedCSV):
        tables.loads(text)


def test_derivative_5pt_exact_on_quartics():
    t = np.sort(np.random.default_rng(3).uniform(0, 2, 30))
    F = np.stack([t**k for k in range(5)], axis=1)
    D = derivative_5pt(t, F)
    want = np.stack([k * t ** max(k - 1, 0) * (k > 0) for k in range(5)], axis=1)
    assert np.allclose(D, want, rtol=1e-9, atol=1e-9)
