"""Flat-file formats: the trajectory CSV and its reader.

A trajectory CSV has the header ``t,f0,f1,f2,f3,f4,g1,g2,g3,R1,R2``, one row
per sample written with 17 significant digits, and trailing comment lines
``# key=value``.  Reading and re-writing a file reproduces it byte for byte.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .algebra import FCoeffs, metric_blocks_unchecked
from .system import constraints

HEADER = ("t", "f0", "f1", "f2", "f3", "f4", "g1", "g2", "g3", "R1", "R2")
FOOTER_KEYS = ("termination", "a", "lambda")


class MalformedCSV(ValueError):
    pass


def fmt(x: float) -> str:
    return "%.17g" % x


@dataclass
class TrajectoryTable:
    """In-memory trajectory CSV: an (n, 11) array plus footer entries."""

    rows: np.ndarray
    footer: dict = field(default_factory=dict)

    @property
    def t(self) -> np.ndarray:
        return self.rows[:, 0]

    @property
    def F(self) -> np.ndarray:
        return self.rows[:, 1:6]

    @property
    def lam(self) -> float | None:
        try:
            return float(self.footer["lambda"])
        except (KeyError, ValueError):
            return None


def derived_columns(F: np.ndarray, lam: float) -> np.ndarray:
    """Metric blocks and raw constraint values for each row of ``F``."""
    out = np.empty((len(F), 5))
    for i, f in enumerate(F):
        fc = FCoeffs(*f)
        out[i, :3] = metric_blocks_unchecked(fc)
        out[i, 3:] = constraints(fc, lam)
    return out


def build_table(t: Iterable[float], F: np.ndarray, lam: float, footer: dict) -> TrajectoryTable:
    t = np.asarray(list(t), dtype=float)
    F = np.asarray(F, dtype=float).reshape(-1, 5)
    rows = np.column_stack([t, F, derived_columns(F, lam)])
    return TrajectoryTable(rows, dict(footer))


def dumps(table: TrajectoryTable) -> str:
    buf = io.StringIO()
    buf.write(",".join(HEADER) + "\n")
    for row in table.rows:
        buf.write(",".join(fmt(v) for v in row) + "\n")
    for k, v in table.footer.items():
        buf.write(f"# {k}={v}\n")
    return buf.getvalue()


def loads(text: str) -> TrajectoryTable:
    """Parse a trajectory CSV.

    Raises
    ------
    MalformedCSV
        On a wrong header, a bad row, a non-increasing t column or an
        unparsable footer line.
    """
    lines = text.splitlines()
    if not lines or lines[0].strip() != ",".join(HEADER):
        raise MalformedCSV("missing or wrong header")
    rows, footer = [], {}
    for n, line in enumerate(lines[1:], start=2):
        if line.startswith("#"):
            key, sep, val = line[1:].strip().partition("=")
            if not sep:
                raise MalformedCSV(f"line {n}: footer is not key=value")
            footer[key] = val
            continue
        if footer:
            raise MalformedCSV(f"line {n}: data after footer")
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(HEADER):
            raise MalformedCSV(f"line {n}: {len(parts)} columns, expected {len(HEADER)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise MalformedCSV(f"line {n}: non-numeric entry") from None
    arr = np.array(rows, dtype=float).reshape(-1, len(HEADER))
    if len(arr) > 1 and not np.all(np.diff(arr[:, 0]) > 0):
        raise MalformedCSV("t column is not strictly increasing")
    return TrajectoryTable(arr, footer)


def read(path) -> TrajectoryTable:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def write(path, table: TrajectoryTable) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(dumps(table))
