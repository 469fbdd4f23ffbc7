"""Command-line front end.

Subcommands: ``oracle-check``, ``solve``, ``sweep``, ``residual`` and
``transform``.  Exit codes: 0 success, 1 numerical failure or tolerance
miss, 2 usage error (bad flags, malformed input).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from fractions import Fraction
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import tables
from .algebra import FCoeffs, is_admissible
from .analysis import (
    classify_homogeneous,
    closing_diagnostics,
    sweep_row,
)
from .errors import InvalidConfig, NPError
from .integrate import SolveConfig, solve
from .system import (
    ORACLES,
    apply_tau,
    constraint_drift,
    constraints,
    np_residual,
    tau_path,
)

log = logging.getLogger("npg2")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
TAUS = ("o", "12", "13", "23", "123", "132")
SUMMARY_KEYS = ("a", "lambda", "termination", "t_star", "max_drift",
                "classification", "closing_report")
SWEEP_COLUMNS = ("a", "termination", "t_star", "max_drift", "class",
                 "closing_verdict", "closing_residual")


class UsageError(Exception):
    pass


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


# ---------------------------------------------------------------------------
# numerics used by the commands

def fd_weights(x0: float, xs: np.ndarray) -> np.ndarray:
    """Weights of the Lagrange-interpolant derivative at ``x0`` on nodes ``xs``."""
    h = np.max(np.abs(xs - x0))
    d = (xs - x0) / h
    n = len(xs)
    V = np.vander(d, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[1] = 1.0
    return np.linalg.solve(V, rhs) / h


def derivative_5pt(t: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Fourth-order derivative estimate of each column of ``Y`` on nodes ``t``.

    Uses the five nearest nodes (centred in the interior, one-sided at the
    ends); the grid need not be uniform.
    """
    n = len(t)
    out = np.empty_like(Y)
    for i in range(n):
        lo = min(max(i - 2, 0), n - 5)
        idx = slice(lo, lo + 5)
        out[i] = fd_weights(t[i], t[idx]) @ Y[idx]
    return out


def _term_sizes(f: FCoeffs, fp: np.ndarray, lam: float) -> np.ndarray:
    """Summed magnitudes of the terms in each component of d phi - lambda * phi.

    Near f0 = 0 the Hodge dual is a ratio of cancelling cubics over f0^3, so
    rounding in f is amplified; dividing by these sizes keeps the residual
    at the level of the data's own rounding.
    """
    f0, f1, f2, f3, f4 = (abs(v) for v in f)
    k = abs(lam) / (2.0 * f0**3)
    d = np.abs(np.asarray(fp, dtype=float)) + np.array([0, 0, 0, 6 * f0, 6 * f0])
    star = k * np.array([
        f1 * f1 * f2 + 3 * f1 * f3 * f4 + 2 * f3**3,
        f1 * f2 * f2 + 3 * f2 * f3 * f4 + 2 * f4**3,
        f1 * f2 * f3 + 2 * f1 * f4 * f4 + f3 * f3 * f4,
        f1 * f2 * f4 + 2 * f2 * f3 * f3 + f3 * f4 * f4,
    ])
    sizes = d + np.append(star, 0.0)
    sizes[4] += 6 * (f3 + f4) + abs(lam) * f0 * f0
    return np.maximum(sizes, 1.0)


def row_residual(f: FCoeffs, fp: np.ndarray, lam: float) -> float:
    """Scaled size of the nearly parallel and constraint residuals at one row.

    Each component of ``d phi - lambda * phi`` is divided by the size of its
    terms and R1, R2 by their own term sums; the result is the largest of
    these.  The arc-length condition enters through R2, which is its cube
    (the cube root itself is ill-conditioned where f0 is small).
    """
    if not is_admissible(f):
        return math.inf
    r = np_residual(f, fp, lam)
    parts = [float(np.max(np.abs(r[:5]) / _term_sizes(f, fp, lam)))]
    parts += [abs(v) for v in constraint_drift(f, lam)]
    return max(parts)


def oracle_table(name: str, n: int) -> tables.TrajectoryTable:
    sol = ORACLES[name]
    lo, hi = sol.domain
    ts = lo + (hi - lo) * np.arange(1, n + 1) / (n + 1)
    F = np.array([sol.evaluate(t)[0] for t in ts], dtype=float)
    footer = {"termination": f"oracle:{name}", "a": "none", "lambda": tables.fmt(sol.lam)}
    return tables.build_table(ts, F, sol.lam, footer)


# ---------------------------------------------------------------------------
# commands

def cmd_oracle_check(args) -> int:
    if args.samples < 2:
        raise UsageError("--samples must be >= 2")
    sol = ORACLES[args.name]
    lo, hi = sol.domain
    ts = lo + (hi - lo) * np.arange(1, args.samples + 1) / (args.samples + 1)
    path = sol.evaluate if args.tau is None else tau_path(args.tau, sol.evaluate)
    if args.tau == "o":
        ts = -ts[::-1]
    worst, where = 0.0, float(ts[0])
    for t in ts:
        f, fp = path(t)
        r = float(np.abs(np_residual(f, fp, sol.lam)).max())
        r = max(r, *(abs(v) for v in constraints(f, sol.lam)))
        if r > worst:
            worst, where = r, float(t)
    print(f"oracle={args.name} lambda={sol.lam:.17g} samples={args.samples} "
          f"max_residual={worst:.3e} at t={where:.17g}")
    if args.csv:
        table = oracle_table(args.name, args.samples)
        if args.tau is not None:
            table = transform_table(table, args.tau)
        tables.write(args.csv, table)
    return EXIT_OK if worst < args.tol else EXIT_FAIL


def _config_from(args, a: float) -> SolveConfig:
    cfg = SolveConfig(a=a, lam=args.lam, t_max=args.t_max, rtol=args.rtol, atol=args.atol,
                      series_order=args.series_order, t_switch=args.t_switch,
                      drift_max=args.drift_max, sample_count=args.samples)
    try:
        cfg.validate()
    except InvalidConfig as exc:
        raise UsageError(str(exc)) from None
    return cfg


def trajectory_table(traj) -> tables.TrajectoryTable:
    rows = []
    for s in traj.samples:
        rows.append([s.t, *s.f, *s.metric, *s.constraints])
    footer = {"termination": str(traj.termination), "a": tables.fmt(traj.a),
              "lambda": tables.fmt(traj.lam)}
    return tables.TrajectoryTable(np.array(rows, dtype=float).reshape(-1, 11), footer)


def summary(traj, fit_window: float, tol: float) -> dict:
    closing = None
    if traj.t_star is not None:
        try:
            closing = closing_diagnostics(traj, fit_window, tol).to_dict()
        except NPError as exc:
            closing = {"error": f"{type(exc).__name__}: {exc}"}
    term = traj.termination
    out = {
        "a": traj.a,
        "lambda": traj.lam,
        "termination": {"kind": term.kind, "t": term.t, "detail": dict(term.detail)},
        "t_star": traj.t_star,
        "max_drift": traj.max_drift,
        "classification": classify_homogeneous(traj, tol) if traj.lam == 1.0 else None,
        "closing_report": closing,
    }
    assert tuple(out) == SUMMARY_KEYS
    return _jsonable(out)


def cmd_solve(args) -> int:
    cfg = _config_from(args, args.a)
    try:
        traj = solve(cfg)
    except NPError as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    if args.out:
        tables.write(args.out, trajectory_table(traj))
    doc = json.dumps(summary(traj, args.fit_window, args.tol), indent=2)
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            fh.write(doc + "\n")
    else:
        print(doc)
    return EXIT_OK


def sweep_grid(a_from: float, a_to: float, steps: int, split: bool) -> list[float]:
    if steps < 1:
        raise UsageError("--steps must be >= 1")
    if min(a_from, a_to) <= 0 <= max(a_from, a_to) and not split:
        raise UsageError("a-range contains 0; pass --split to sweep both signs")
    grid = [a_from] if steps == 1 else list(np.linspace(a_from, a_to, steps))
    kept = [float(a) for a in grid if a != 0]
    if len(kept) < len(grid):
        log.info("dropped a = 0 from the grid")
    if not kept:
        raise UsageError("empty parameter grid")
    return sorted(kept)


def _row_fields(row) -> dict:
    if row.termination is None:
        term = "error:" + (row.error or "").split(":")[0]
    else:
        term = str(row.termination)
    opt = lambda v: "" if v is None else tables.fmt(v)  # noqa: E731
    return {
        "a": tables.fmt(row.a),
        "termination": term,
        "t_star": opt(row.t_star),
        "max_drift": opt(row.max_drift),
        "class": row.classification or "",
        "closing_verdict": row.closing_verdict,
        "closing_residual": opt(row.closing_residual),
    }


def cmd_sweep(args) -> int:
    grid = sweep_grid(args.a_from, args.a_to, args.steps, args.split)
    base = _config_from(args, grid[0])
    jobs = [(a, base, args.fit_window, args.tol) for a in grid]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            rows = list(pool.map(sweep_row, *zip(*jobs)))
    else:
        rows = [sweep_row(*j) for j in jobs]
    out = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.DictWriter(out, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow(_row_fields(row))
    finally:
        if out is not sys.stdout:
            out.close()
    failed = [r.a for r in rows if r.termination is None]
    if failed:
        print(f"{len(failed)} row(s) failed: {failed}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _read_table(path) -> tables.TrajectoryTable:
    try:
        return tables.read(path)
    except (OSError, tables.MalformedCSV) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None


def table_residual(table: tables.TrajectoryTable, lam: float) -> tuple[float, float]:
    """Largest scaled residual over the rows and the t where it occurs."""
    t, F = table.t, table.F
    Fp = derivative_5pt(t, F)
    res = np.array([row_residual(FCoeffs(*F[i]), Fp[i], lam) for i in range(len(t))])
    i = int(np.argmax(res))
    return float(res[i]), float(t[i])


def cmd_residual(args) -> int:
    table = _read_table(args.input)
    if len(table.rows) < 5:
        raise UsageError(f"need at least 5 rows, got {len(table.rows)}")
    lam = args.lam if args.lam is not None else table.lam
    if lam is None:
        raise UsageError("lambda not given and not found in the footer")
    worst, where = table_residual(table, lam)
    print(f"rows={len(table.rows)} lambda={lam:.17g} max_residual={worst:.3e} at t={where:.17g}")
    return EXIT_OK if worst < args.tol else EXIT_FAIL


def transform_table(table: tables.TrajectoryTable, tau: str) -> tables.TrajectoryTable:
    if tau not in TAUS:
        raise UsageError(f"unknown tau {tau!r}; choose from {', '.join(TAUS)}")
    t, F = table.t, table.F
    # exact rational arithmetic, one rounding per entry
    G = np.array([[float(v) for v in apply_tau(tau, [Fraction(float(x)) for x in f])]
                  for f in F], dtype=float).reshape(-1, 5)
    if tau == "o":
        t, G = -t[::-1], G[::-1]
    lam = table.lam if table.lam is not None else 1.0
    return tables.build_table(t, G, lam, table.footer)


def cmd_transform(args) -> int:
    table = _read_table(args.input)
    out = transform_table(table, args.tau)
    if args.out:
        tables.write(args.out, out)
    else:
        sys.stdout.write(tables.dumps(out))
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _positive(kind):
    def conv(s):
        v = kind(s)
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {s}")
        return v
    return conv


def _solver_flags(p):
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--t-max", type=_positive(float), default=3.0)
    p.add_argument("--rtol", type=_positive(float), default=1e-10)
    p.add_argument("--atol", type=_positive(float), default=1e-12)
    p.add_argument("--series-order", type=int, default=8)
    p.add_argument("--t-switch", type=_positive(float), default=1e-3)
    p.add_argument("--drift-max", type=_positive(float), default=1e-8)
    p.add_argument("--samples", type=_positive(int), default=1000,
                   help="number of output samples on (0, t-max]")
    p.add_argument("--fit-window", type=_positive(float), default=0.5,
                   help="width in s of the closing-diagnostics fit window")
    p.add_argument("--tol", type=_positive(float), default=1e-5,
                   help="classification and closing tolerance")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="npg2", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("oracle-check", help="residuals of a closed-form solution")
    p.add_argument("name", choices=sorted(ORACLES))
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--tol", type=_positive(float), default=1e-9)
    p.add_argument("--tau", choices=TAUS, default=None,
                   help="check the transformed solution instead")
    p.add_argument("--csv", default=None, help="also write the samples as a trajectory CSV")
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("solve", help="integrate one member of the family")
    p.add_argument("--a", type=float, required=True)
    _solver_flags(p)
    p.add_argument("--out", default=None, help="trajectory CSV path")
    p.add_argument("--json", default=None, help="summary JSON path (default: stdout)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="solve over a grid of a")
    p.add_argument("--a-from", type=float, required=True)
    p.add_argument("--a-to", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--split", action="store_true",
                   help="allow a range containing 0 (a = 0 itself is dropped)")
    p.add_argument("--jobs", type=_positive(int), default=1)
    _solver_flags(p)
    p.add_argument("--out", default=None, help="sweep CSV path (default: stdout)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("residual", help="check a trajectory CSV against the equations")
    p.add_argument("input")
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="default: the value in the CSV footer")
    p.add_argument("--tol", type=_positive(float), default=1e-6)
    p.set_defaults(func=cmd_residual)

    p = sub.add_parser("transform", help="apply a symmetry to a trajectory CSV")
    p.add_argument("input")
    p.add_argument("--tau", required=True, choices=TAUS)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_transform)
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
