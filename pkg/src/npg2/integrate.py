"""Adaptive integration of the regular and the desingularized systems.

The stepper is scipy's Dormand-Prince 8(5,3) pair (``DOP853``) driven one
step at a time; after every accepted step the step's dense output is scanned
for events:

* ``h0_zero``            f0 (equivalently h0) changes sign
* ``positivity_failure`` f1 f4 - f3^2 or f2 f3 - f4^2 reaches zero
* ``drift_exceeded``     the relative R2 defect exceeds ``drift_max``
* ``step_underflow``     the step size controller gives up

The far end of a closing solution is itself a singular orbit (f0 -> 0), and
near it perturbations grow like (t* - t)^-l, so the numerical solution
always breaks down (drift or underflow) a little before t*.  When that
happens while f0 is heading to zero, t* is located by polynomial
extrapolation of f0 over the trustworthy tail and the termination is
reported as ``h0_zero`` with ``detail["method"] == "extrapolated"``.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.integrate import DOP853

from .algebra import FCoeffs, MetricBlocks, is_admissible, metric_blocks_unchecked
from .errors import (
    ConstraintViolatedAtStart,
    InvalidConfig,
    NonAdmissible,
    SingularRecurrence,
    StartupFailure,
)
from .series import HState, TruncatedEvenSeries, f_from_h, initial_state, rhs_h_array, taylor_startup
from .system import ConstraintValues, constraint_drift, constraints, rhs_f_array

TERMINATIONS = ("reached_t_max", "h0_zero", "positivity_failure", "drift_exceeded",
                "step_underflow")


@dataclass(frozen=True)
class SolveConfig:
    a: float
    lam: float = 1.0
    t_max: float = 3.0
    rtol: float = 1e-12
    atol: float = 1e-14
    series_order: int = 8
    t_switch: float = 1e-3
    h0_zero_tol: float = 1e-10
    positivity_margin: float = 1e-10
    drift_max: float = 1e-8
    sample_count: int = 1000
    max_steps: int = 100_000
    locate_degeneration: bool = True

    def validate(self) -> None:
        if not self.a or not math.isfinite(self.a):
            raise InvalidConfig("a must be a nonzero finite number")
        if not self.lam or not math.isfinite(self.lam):
            raise InvalidConfig("lambda must be a nonzero finite number")
        if not 0 < self.t_switch < self.t_max:
            raise InvalidConfig(f"need 0 < t_switch < t_max, got {self.t_switch}, {self.t_max}")
        if self.rtol <= 0 or self.atol <= 0:
            raise InvalidConfig("tolerances must be positive")
        if self.series_order < 2 or self.series_order % 2:
            raise InvalidConfig("series_order must be an even integer >= 2")
        if self.sample_count < 1:
            raise InvalidConfig("sample_count must be positive")
        if min(self.h0_zero_tol, self.positivity_margin, self.drift_max) < 0:
            raise InvalidConfig("event thresholds must be non-negative")


class Termination(NamedTuple):
    kind: str
    t: float
    detail: dict = {}

    def __str__(self):
        if self.kind == "positivity_failure":
            return f"{self.kind}({self.t:.17g},{self.detail.get('which', '?')})"
        if self.kind == "reached_t_max":
            return self.kind
        return f"{self.kind}({self.t:.17g})"


class Sample(NamedTuple):
    t: float
    h: HState | None
    f: FCoeffs
    metric: MetricBlocks
    constraints: ConstraintValues


@dataclass(frozen=True)
class Trajectory:
    samples: tuple[Sample, ...]
    termination: Termination
    lam: float
    a: float | None = None
    max_drift: float = 0.0
    step_times: tuple[float, ...] = ()
    state_at: Callable[[float], np.ndarray] | None = field(default=None, repr=False, compare=False)
    f_at: Callable[[float], FCoeffs] | None = field(default=None, repr=False, compare=False)

    @property
    def t(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    @property
    def F(self) -> np.ndarray:
        """Sampled coefficients as an (n, 5) array."""
        return np.array([s.f for s in self.samples], dtype=float).reshape(-1, 5)

    @property
    def H(self) -> np.ndarray:
        return np.array([s.h for s in self.samples], dtype=float).reshape(-1, 4)

    @property
    def t_star(self) -> float | None:
        return self.termination.t if self.termination.kind == "h0_zero" else None

    @property
    def t_end(self) -> float:
        """Last time up to which the stored solution is trusted."""
        return self.termination.detail.get("t_end", self.termination.t)


# ---------------------------------------------------------------------------
# event machinery

def _positivity(f: FCoeffs, margin: float) -> str | None:
    f0, f1, f2, f3, f4 = f
    if f1 * f4 - f3**2 >= -margin * (abs(f1 * f4) + f3**2):
        return "f1f4-f3^2"
    if f2 * f3 - f4**2 >= -margin * (abs(f2 * f3) + f4**2):
        return "f2f3-f4^2"
    return None


def _bisect(pred, lo: float, hi: float, tol: float = 1e-10) -> float:
    """Smallest t in (lo, hi] with pred(t) true, assuming pred(lo) false and pred(hi) true."""
    while hi - lo > tol * max(1.0, abs(hi)):
        mid = 0.5 * (lo + hi)
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return hi


def detect_events(dense, t_prev: float, t_new: float, to_f, lam: float,
                  cfg) -> Termination | None:
    """Earliest event on the step ``[t_prev, t_new]`` of a dense output.

    ``to_f(t, y)`` maps the integrated state to coefficients; ``cfg`` supplies
    ``positivity_margin`` and ``drift_max``.
    """
    found = []
    y0, y1 = dense(t_prev), dense(t_new)
    if y0[0] * y1[0] <= 0 and y0[0] != 0:
        tz = _bisect(lambda s: dense(s)[0] * y0[0] <= 0, t_prev, t_new)
        found.append(Termination("h0_zero", tz, {"method": "bracketed"}))

    def pos(s):
        return _positivity(to_f(s, dense(s)), cfg.positivity_margin)

    if pos(t_new):
        tp = _bisect(lambda s: pos(s) is not None, t_prev, t_new)
        found.append(Termination("positivity_failure", tp, {"which": pos(tp) or pos(t_new)}))

    def drift(s):
        return abs(constraint_drift(to_f(s, dense(s)), lam).R2)

    if drift(t_new) > cfg.drift_max:
        td = _bisect(lambda s: drift(s) > cfg.drift_max, t_prev, t_new)
        found.append(Termination("drift_exceeded", td, {}))
    return min(found, key=lambda e: e.t) if found else None


class _Piecewise:
    """Dense interpolant assembled from per-step dense outputs."""

    def __init__(self):
        self.knots: list[float] = []
        self.pieces = []
        self.head = None  # (t_hi, callable) covering [.., t_hi] before the first knot

    def add(self, t_hi, dense):
        self.knots.append(t_hi)
        self.pieces.append(dense)

    def __call__(self, t):
        if self.head is not None and t <= self.head[0]:
            return self.head[1](t)
        i = bisect.bisect_left(self.knots, t)
        i = min(i, len(self.pieces) - 1)
        return self.pieces[i](t)


def _extrapolate_zero(fun0, t_lo: float, t_hi: float,
                      reach: float = 2.0) -> tuple[float, float] | None:
    """Root of f0 beyond ``t_hi`` from polynomial fits on ``[t_lo, t_hi]``.

    Returns (t_star, spread) where spread is the disagreement between two
    fits of different degree and window, or None when no consistent root
    lies within ``reach`` window widths of ``t_hi``.
    """
    width = t_hi - t_lo
    roots = []
    for frac, deg in ((1.0, 7), (0.75, 6)):
        ts = np.linspace(t_hi - frac * width, t_hi, 64)
        vs = np.array([fun0(s) for s in ts])
        p = np.polynomial.Polynomial.fit(ts, vs, deg)
        cand = [z.real for z in p.roots()
                if abs(z.imag) < 1e-8 * max(1.0, abs(z)) and t_hi - 1e-9 <= z.real <= t_hi + reach * width]
        if not cand:
            return None
        roots.append(min(cand))
    spread = abs(roots[0] - roots[1])
    if spread > 1e-3 * max(1.0, width):
        return None
    return roots[0], spread


def _drive(fun, t0, y0, t_bound, to_f, lam, cfg, sample_times, head=None):
    """Step from t0 toward t_bound (t_bound > t0), recording samples and events."""
    solver = DOP853(fun, t0, y0, t_bound, rtol=cfg.rtol, atol=cfg.atol)
    dense = _Piecewise()
    dense.head = head
    steps = [t0]
    term = None
    for _ in range(cfg.max_steps):
        if solver.status != "running":
            break
        t_prev = solver.t
        msg = solver.step()
        if solver.status == "failed":
            term = Termination("step_underflow", t_prev, {"message": str(msg)})
            break
        d = solver.dense_output()
        dense.add(solver.t, d)
        ev = detect_events(d, t_prev, solver.t, to_f, lam, cfg)
        if ev is not None:
            term = ev
            break
        steps.append(solver.t)
    else:
        term = Termination("step_underflow", solver.t, {"message": "max_steps reached"})
    if term is None:
        term = Termination("reached_t_max", solver.t, {})
    return term, dense, steps


def _make_samples(times, state_at, to_f, lam, with_h):
    out = []
    for t in times:
        y = state_at(t)
        f = to_f(t, y)
        out.append(Sample(float(t), HState(*map(float, y)) if with_h else None,
                          FCoeffs(*map(float, f)), metric_blocks_unchecked(f),
                          constraints(f, lam)))
    return tuple(out)


# ---------------------------------------------------------------------------
# public drivers

def solve(config: SolveConfig) -> Trajectory:
    """Integrate the smooth solution emanating from the singular orbit.

    The startup series covers [0, t_switch]; the adaptive stepper takes over
    from there.  Samples lie on the uniform grid ``t_max * k / sample_count``
    (k >= 1) up to the termination time.

    Raises
    ------
    InvalidConfig
        For inconsistent configuration values.
    StartupFailure
        If the startup recurrence is singular.
    """
    config.validate()
    lam = config.lam
    init = initial_state(config.a, lam)
    try:
        series = taylor_startup(init, config.series_order)
    except SingularRecurrence as exc:
        raise StartupFailure(str(exc)) from exc
    t_sw = config.t_switch

    def to_f(t, y):
        return f_from_h(y, t, lam)

    term, dense, steps = _drive(lambda t, y: rhs_h_array(y, t, lam), t_sw, series(t_sw),
                                config.t_max, to_f, lam, config, None, head=(t_sw, series))
    t_end = term.t
    if term.kind != "reached_t_max" and term.kind != "h0_zero" and config.locate_degeneration:
        term = _maybe_degeneration(term, dense, to_f, t_sw)
        t_end = term.detail.get("t_end", t_end)
    grid = config.t_max * np.arange(1, config.sample_count + 1) / config.sample_count
    grid = grid[grid <= t_end]
    samples = _make_samples(grid, dense, to_f, lam, True)
    return _finish(samples, term, lam, config.a, steps, dense, to_f)


def _maybe_degeneration(term, dense, to_f, t_start):
    t_end = term.t
    width = min(0.15 * t_end, t_end - t_start)
    if width <= 0:
        return term
    f0 = [to_f(s, dense(s))[0] for s in np.linspace(t_end - width, t_end, 9)]
    # only meaningful while |f0| is shrinking toward the end
    if not (abs(f0[-1]) < abs(f0[0]) and np.all(np.diff(np.abs(f0)) < 0)):
        return term
    est = _extrapolate_zero(lambda s: to_f(s, dense(s))[0], t_end - width, t_end)
    if est is None:
        return term
    t_star, spread = est
    return Termination("h0_zero", float(t_star),
                       {"method": "extrapolated", "t_end": t_end, "trigger": term.kind,
                        "spread": spread})


def _finish(samples, term, lam, a, steps, dense, to_f):
    drifts = [abs(constraint_drift(to_f(t, dense(t)), lam).R2) for t in steps[1:]]
    drifts += [abs(constraint_drift(s.f, lam).R2) for s in samples]
    return Trajectory(samples, term, lam, a, max(drifts, default=0.0), tuple(steps),
                      state_at=dense, f_at=lambda t: FCoeffs(*to_f(t, dense(t))))


def integrate_f(f_start: FCoeffs, lam: float, t0: float, t_max: float, rtol: float = 1e-12,
                atol: float = 1e-14, sample_count: int = 200, drift_max: float = 1e-8,
                positivity_margin: float = 1e-10, constraint_tol: float = 1e-10) -> Trajectory:
    """Integrate the regular system (f0, ..., f4) from a point of the constraint set.

    Backward integration (``t_max < t0``) runs the negated vector field in
    reversed time.  Samples are returned in increasing t.

    Raises
    ------
    NonAdmissible
        If the start point is not admissible.
    ConstraintViolatedAtStart
        If the relative constraint defects at the start exceed ``constraint_tol``.
    """
    f_start = FCoeffs(*map(float, f_start))
    if not is_admissible(f_start):
        raise NonAdmissible(f"start point {tuple(f_start)} is not admissible")
    r = constraint_drift(f_start, lam)
    if max(abs(r.R1), abs(r.R2)) > constraint_tol:
        raise ConstraintViolatedAtStart(f"constraint defects {tuple(r)} at start")
    sign = 1.0 if t_max >= t0 else -1.0
    span = abs(t_max - t0)
    cfg = SolveConfig(a=1.0, lam=lam, t_max=max(span, 1e-300), rtol=rtol, atol=atol,
                      drift_max=drift_max, positivity_margin=positivity_margin)

    # u = sign * (t - t0) runs forward from 0
    def fun(u, y):
        return sign * rhs_f_array(y, lam)

    def to_f(u, y):
        return y

    term, dense, steps = _drive(fun, 0.0, np.array(f_start), span, to_f, lam, cfg, None)
    u_grid = span * np.arange(sample_count + 1) / sample_count
    u_grid = u_grid[u_grid <= term.t]
    samples = _make_samples(u_grid, dense, to_f, lam, False)
    samples = tuple(s._replace(t=t0 + sign * s.t) for s in samples)
    if sign < 0:
        samples = samples[::-1]
    term = term._replace(t=t0 + sign * term.t)

    def state_at(t):
        return dense(sign * (t - t0))

    traj = _finish(samples, term, lam, None, steps, dense, to_f)
    return Trajectory(traj.samples, term, lam, None, traj.max_drift,
                      tuple(t0 + sign * u for u in steps), state_at=state_at,
                      f_at=lambda t: FCoeffs(*state_at(t)))
