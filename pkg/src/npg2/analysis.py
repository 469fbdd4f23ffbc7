"""Post-processing of trajectories.

Metric norms along a path, the small-t expansion of g2, detection of the two
homogeneous solutions inside the family, closing diagnostics at a singular
orbit and sweeps over the family parameter a.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Iterable, NamedTuple

import numpy as np

from .algebra import FCoeffs, SingularPointForm, is_admissible, singular_point_form
from .errors import FitWindowTooSmall, InsufficientSamples, NoDegeneration, NonAdmissible
from .integrate import SolveConfig, Termination, Trajectory, solve
from .system import normalized_oracle, tau_path

log = logging.getLogger(__name__)

ROUND_LIKE = "round_like"
SQUASHED_LIKE = "squashed_like"
GENERIC = "generic"
CLOSES = "closes_within_tol"


class MetricNorms(NamedTuple):
    """Squared norms ``|e2|^2``, ``|e5|^2`` and ``|e2 + e5|^2`` along a path."""

    t: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    g3: np.ndarray


def norms_from_f(F: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Metric norms for an (n, 5) array of coefficients."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    f0, f1, f2, f3, f4 = F.T
    q = f0 * f0
    g1 = (f3 * f3 - f1 * f4) / q
    g2 = (f4 * f4 - f2 * f3) / q
    cross = (f3 * f4 - f1 * f2) / (2 * q)
    return g1, g2, g1 + g2 + 2 * cross


def metric_norms(traj: Trajectory) -> MetricNorms:
    """Norm functions g1, g2, g3 sampled along ``traj``.

    Raises
    ------
    NonAdmissible
        If some sample does not define a G2-structure.
    """
    for s in traj.samples:
        if not is_admissible(s.f):
            raise NonAdmissible(f"sample at t = {s.t} is not admissible")
    return MetricNorms(traj.t, *norms_from_f(traj.F))


def g2_expected_coefficient(a: float) -> float:
    """t^2 coefficient of g2 predicted by the series at lambda = 1."""
    return -5.0 / 576.0 * a * a + a / 8.0 + 27.0 / 4.0


def g2_quadratic_coefficient(traj: Trajectory, t_fit: float = 0.05,
                             min_samples: int = 5) -> float:
    """Least-squares t^2 coefficient of ``g2(t) - a^2/9`` near the singular orbit.

    The fit uses the even basis t^2, t^4, t^6 on samples with 0 < t <= t_fit.

    Raises
    ------
    InsufficientSamples
        If fewer than ``min_samples`` samples fall in the fit range.
    ValueError
        If the trajectory was not started from the singular orbit at lambda = 1.
    """
    if traj.a is None or traj.lam != 1.0:
        raise ValueError("need a lambda = 1 trajectory started at the singular orbit")
    t = traj.t
    mask = (t > 0) & (t <= t_fit)
    if mask.sum() < min_samples:
        raise InsufficientSamples(
            f"{int(mask.sum())} samples in (0, {t_fit}], need {min_samples}")
    ts = t[mask]
    _, g2, _ = norms_from_f(traj.F[mask])
    y = g2 - traj.a**2 / 9.0
    x = ts * ts
    V = np.stack([x, x * x, x**3], axis=1)
    c, *_ = np.linalg.lstsq(V, y, rcond=None)
    return float(c[0])


# ---------------------------------------------------------------------------
# homogeneous detection

def _candidates():
    out = []
    for name, label in (("round_sphere", ROUND_LIKE), ("squashed_sphere", SQUASHED_LIKE)):
        sol = normalized_oracle(name)
        # tau_13 maps the solution with parameter a to the one with -a
        out.append((label, sol.evaluate, sol.domain[1]))
        out.append((label, tau_path("13", sol.evaluate), sol.domain[1]))
    return out


def homogeneous_distance(traj: Trajectory) -> dict[str, float]:
    """Relative sup distance from ``traj`` to each homogeneous solution.

    The distance is taken over the samples lying inside both domains and is
    relative to the largest coefficient of the trajectory there.
    """
    t = traj.t
    F = traj.F
    best: dict[str, float] = {}
    for label, path, t_hi in _candidates():
        mask = (t > 0) & (t < t_hi)
        if not mask.any():
            continue
        ref = np.array([path(ti)[0] for ti in t[mask]], dtype=float)
        scale = np.abs(F[mask]).max()
        d = float(np.abs(F[mask] - ref).max() / scale)
        best[label] = min(d, best.get(label, math.inf))
    return best


def classify_homogeneous(traj: Trajectory, tol: float = 1e-5) -> str:
    """Label a lambda = 1 family member as round_like, squashed_like or generic."""
    dist = homogeneous_distance(traj)
    if not dist:
        return GENERIC
    label, d = min(dist.items(), key=lambda kv: kv[1])
    return label if d < tol else GENERIC


# ---------------------------------------------------------------------------
# closing diagnostics

# expected parity (1 = odd) of (f0, ..., f4) at a singular orbit
_PARITY = (1, 0, 0, 0, 0)


class LimitData(NamedTuple):
    """Reflected data at the singular orbit, estimated from the fits."""

    f2_at_0: float
    f0prime_at_0: float
    phi_p: SingularPointForm


@dataclass(frozen=True)
class ClosingReport:
    """Residuals of the smooth-closing conditions at a singular orbit.

    All residuals are dimensionless.  A defect is relative to the largest
    coefficient on the fit window, with the s-dependence measured in units of
    the window end ``s_hi`` (so a coefficient of ``s^k`` enters through its
    contribution at ``s = s_hi``).  The non-degeneracy margins must be large,
    everything else small.
    """

    t_star: float
    at: str
    window: tuple[float, float]
    limit: LimitData
    residuals: dict
    margins: dict
    tol: float

    @property
    def failed(self) -> tuple[str, ...]:
        bad = [k for k, v in self.residuals.items() if not v < self.tol]
        bad += [k for k, v in self.margins.items() if not v > self.tol]
        return tuple(bad)

    @property
    def verdict(self) -> str:
        return closing_verdict(self.residuals, self.margins, self.tol)

    @property
    def closes(self) -> bool:
        return not self.failed

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values())

    def to_dict(self) -> dict:
        return {
            "t_star": self.t_star,
            "at": self.at,
            "window": list(self.window),
            "f2_at_0": self.limit.f2_at_0,
            "f0prime_at_0": self.limit.f0prime_at_0,
            "phi_p_stable": self.limit.phi_p.stable,
            "residuals": dict(self.residuals),
            "margins": dict(self.margins),
            "tol": self.tol,
            "verdict": self.verdict,
        }


def closing_verdict(residuals: dict, margins: dict, tol: float) -> str:
    bad = [k for k, v in residuals.items() if not v < tol]
    bad += [k for k, v in margins.items() if not v > tol]
    return CLOSES if not bad else "fails(" + ",".join(bad) + ")"


def _parity_fit(x: np.ndarray, y: np.ndarray, parity: int, degree: int,
                probe: int) -> np.ndarray:
    """Fit with all monomials of the expected parity up to ``degree`` plus the
    wrong-parity monomials up to ``probe``; returns dense coefficients."""
    ks = [k for k in range(degree + 1) if k % 2 == parity]
    ks += [k for k in range(probe + 1) if k % 2 != parity]
    V = np.stack([x**k for k in ks], axis=1)
    c, *_ = np.linalg.lstsq(V, y, rcond=None)
    out = np.zeros(max(degree, probe) + 1)
    out[ks] = c
    return out


def _window_data(traj: Trajectory, at: str, s_lo: float, s_hi: float, n: int):
    if at == "far":
        t_of = lambda s: traj.t_star - s  # noqa: E731
    else:
        t_of = lambda s: s  # noqa: E731
    if traj.f_at is not None:
        s = np.linspace(s_lo, s_hi, n)
        F = np.array([traj.f_at(t_of(si)) for si in s], dtype=float)
    else:
        s = t_of(traj.t) if at == "far" else traj.t
        keep = (s >= s_lo - 1e-12) & (s <= s_hi + 1e-12)
        s, F = s[keep], traj.F[keep]
        order = np.argsort(s)
        s, F = s[order], F[order]
    if at == "far":
        # time reversal followed by tau_12: the two sign flips of f0 cancel
        F = F[:, [0, 2, 1, 4, 3]]
    return s, F


def closing_diagnostics(traj: Trajectory, fit_window: float = 0.5, tol: float = 1e-5,
                        at: str = "far", degree: int = 10, probe: int = 1,
                        n_points: int = 100) -> ClosingReport:
    """Test the smooth-closing conditions at a singular orbit of ``traj``.

    Parameters
    ----------
    traj : Trajectory
        A solution; for ``at="far"`` it must have terminated with h0_zero.
    fit_window : float
        Width in s of the fit window, which starts where the trusted data
        ends (``s = t* - t_end`` at the far orbit, ``s = 0`` at the start).
    tol : float
        Threshold applied to all residuals and margins.
    at : {"far", "start"}
        ``"far"`` re-centres at the degeneration time with ``s = t* - t``
        and applies tau_12; ``"start"`` uses ``s = t`` unchanged.
    degree : int
        Highest power of the expected parity in each fit.
    probe : int
        Highest wrong-parity power; its coefficients give the parity defect.
    n_points : int
        Number of points resampled from the dense output.

    Raises
    ------
    NoDegeneration
        If ``at="far"`` and the trajectory has no degeneration time.
    FitWindowTooSmall
        If the window is empty, leaves the data range, or holds too few points.
    """
    if at not in ("far", "start"):
        raise ValueError(f"at must be 'far' or 'start', got {at!r}")
    if at == "far":
        if traj.t_star is None:
            raise NoDegeneration(f"trajectory ended with {traj.termination}")
        t_star = float(traj.t_star)
        s_lo = t_star - traj.t_end
        span = t_star
    else:
        t_star = 0.0
        s_lo = 0.0
        span = traj.t_end
    s_hi = s_lo + fit_window
    if not fit_window > 0 or s_hi > span:
        raise FitWindowTooSmall(f"window [{s_lo:.4g}, {s_hi:.4g}] not inside the data range")
    s, F = _window_data(traj, at, s_lo, s_hi, n_points)
    n_coef = degree // 2 + 2 + probe // 2
    if len(s) < n_coef + 2:
        raise FitWindowTooSmall(f"{len(s)} points in the window, need {n_coef + 2}")

    x = s / s_hi
    M = float(np.abs(F).max())
    C = [_parity_fit(x, F[:, i], _PARITY[i], degree, probe) for i in range(5)]
    wrong = max(abs(C[i][k]) for i in range(5) for k in range(probe + 1)
                if k % 2 != _PARITY[i])
    residuals = {
        "parity": wrong / M,
        "f1_value": abs(C[1][0]) / M,
        "f3_value": abs(C[3][0]) / M,
        "f4_value": abs(C[4][0]) / M,
        "f1_second": abs(2 * C[1][2]) / M,
        "jet": abs(6 * C[0][1] * s_hi - 2 * C[3][2]) / M,
    }
    margins = {"f2_nonzero": abs(C[2][0]) / M, "f0prime_nonzero": abs(C[0][1]) / M}
    f2_0 = float(C[2][0])
    f0p_0 = float(C[0][1] / s_hi)
    limit = LimitData(f2_0, f0p_0, singular_point_form(f2_0, f0p_0))
    return ClosingReport(t_star, at, (float(s_lo), float(s_hi)), limit,
                         {k: float(v) for k, v in residuals.items()},
                         {k: float(v) for k, v in margins.items()}, tol)


# ---------------------------------------------------------------------------
# sweeps

@dataclass(frozen=True)
class SweepRow:
    a: float
    termination: Termination | None
    t_star: float | None
    max_drift: float | None
    classification: str | None
    closing: ClosingReport | None
    error: str | None = None

    @property
    def closing_verdict(self) -> str:
        if self.closing is None:
            return "n/a"
        return self.closing.verdict

    @property
    def closing_residual(self) -> float | None:
        return None if self.closing is None else self.closing.max_residual


def sweep_row(a: float, base: SolveConfig, fit_window: float = 0.5,
              tol: float = 1e-5) -> SweepRow:
    """Solve, classify and (if degenerate) diagnose one member of the family.

    Failures are recorded in the ``error`` field instead of being raised.
    """
    try:
        traj = solve(replace(base, a=float(a)))
        metric_norms(traj)
        label = classify_homogeneous(traj, tol)
    except Exception as exc:  # one bad parameter must not abort a sweep
        log.warning("sweep row a=%g failed: %s", a, exc)
        return SweepRow(float(a), None, None, None, None, None,
                        f"{type(exc).__name__}: {exc}")
    closing = None
    err = None
    if traj.t_star is not None:
        try:
            closing = closing_diagnostics(traj, fit_window, tol)
        except Exception as exc:
            err = f"{type(exc).__name__}: {exc}"
    return SweepRow(float(a), traj.termination, traj.t_star, traj.max_drift,
                    label, closing, err)


def sweep(a_grid: Iterable[float], base: SolveConfig, fit_window: float = 0.5,
          tol: float = 1e-5) -> list[SweepRow]:
    """Run :func:`sweep_row` over ``a_grid``; rows are returned sorted by a.

    Raises
    ------
    ValueError
        If the grid is empty.
    """
    grid = sorted(float(a) for a in a_grid)
    if not grid:
        raise ValueError("empty parameter grid")
    return [sweep_row(a, base, fit_window, tol) for a in grid]
