"""The nearly parallel equations ``d phi = lambda * phi`` on the regular part.

Contents: the explicit first-order system for (f0, ..., f4), its two
conserved constraints R1, R2, the rescaling symmetry, the S_3 x time-reversal
transformations, a constraint-surface seeding helper and the three
closed-form solutions (sine-cone, round sphere, squashed sphere).

A *path* is any callable ``t -> (FCoeffs, fprime)`` returning the
coefficients and their derivatives at ``t``.
"""
from __future__ import annotations

import logging
import math
from typing import Callable, NamedTuple

import numpy as np

from .algebra import (
    FCoeffs,
    exterior_derivative,
    g11_residual,
    hodge_dual_unchecked,
    is_admissible,
)
from .errors import Degenerate, NoAdmissibleRoot, NonAdmissible, OutOfDomain

log = logging.getLogger(__name__)

Path = Callable[[float], "tuple[FCoeffs, np.ndarray]"]


class ConstraintValues(NamedTuple):
    R1: float
    R2: float


def rhs_f(f: FCoeffs, lam: float) -> np.ndarray:
    """Derivatives (f0', f1', f2', f3', f4') of a nearly parallel structure.

    Raises
    ------
    NonAdmissible
        If ``f`` is not admissible.
    """
    if not is_admissible(f):
        raise NonAdmissible(f"coefficients {tuple(f)} are not admissible")
    return rhs_f_array(np.asarray(f, dtype=float), lam)


def rhs_f_array(y: np.ndarray, lam: float) -> np.ndarray:
    """Unchecked right-hand side on a raw 5-vector (integrator hot path)."""
    f0, f1, f2, f3, f4 = y
    b1 = f1 * f4 - f3 * f3
    b2 = f2 * f3 - f4 * f4
    c = 0.5 * (f1 * f2 - f3 * f4)
    k = lam / f0**3
    return np.array([
        -1.5 / f0**4 * ((f1 + f3) * b2 - (f2 + f4) * b1),
        k * (f1 * c - f3 * b1),
        k * (f4 * b2 - f2 * c),
        6 * f0 + 0.5 * k * (f1 * b2 - f4 * b1),
        -6 * f0 + 0.5 * k * (f3 * b2 - f2 * b1),
    ])


def constraints(f: FCoeffs, lam: float) -> ConstraintValues:
    f0, f1, f2, f3, f4 = f
    r1 = f3 + f4 + lam / 6.0 * f0**2
    r2 = (f1 * f4 - f3**2) * (f2 * f3 - f4**2) - 0.25 * (f1 * f2 - f3 * f4) ** 2 - f0**6
    return ConstraintValues(r1, r2)


def constraint_drift(f: FCoeffs, lam: float) -> ConstraintValues:
    """R1 and R2 divided by the summed magnitudes of their own terms.

    Dimensionless and finite wherever the structure is non-degenerate, so a
    single threshold applies to every lambda and every stretch of a
    trajectory, including the approach to f0 = 0.
    """
    f0, f1, f2, f3, f4 = f
    r1, r2 = constraints(f, lam)
    s1 = abs(f3) + abs(f4) + abs(lam) / 6.0 * f0**2
    b1b2 = (f1 * f4 - f3**2) * (f2 * f3 - f4**2)
    s2 = abs(b1b2) + 0.25 * (f1 * f2 - f3 * f4) ** 2 + f0**6
    return ConstraintValues(r1 / s1 if s1 else r1, r2 / s2 if s2 else r2)


def np_residual(f: FCoeffs, fprime, lam: float) -> np.ndarray:
    """``d phi - lambda * phi`` (five components) followed by the g11 residual."""
    if not is_admissible(f):
        raise NonAdmissible(f"coefficients {tuple(f)} are not admissible")
    d = exterior_derivative(f, fprime).as_array()
    s = hodge_dual_unchecked(f).as_array()
    return np.append(d - lam * s, g11_residual(f))


# ---------------------------------------------------------------------------
# symmetries

def rescale(path: Path, lam: float, mu: float | None = None) -> tuple[Path, float]:
    """Rescale a solution path: ``f0 -> mu^2 f0(t/mu)``, ``fi -> mu^3 fi(t/mu)``.

    A ``lam``-solution becomes a ``lam/mu``-solution; the default ``mu = lam``
    yields the normalized ``lambda = 1`` solution.

    Returns
    -------
    (path, new_lambda)
    """
    mu = lam if mu is None else mu
    if mu == 0:
        raise ValueError("rescaling factor must be nonzero")
    if mu == 1:
        return path, lam
    w = np.array([mu**2, mu**3, mu**3, mu**3, mu**3])

    def scaled(t):
        f, fp = path(t / mu)
        return FCoeffs(*(w * np.asarray(f))), w / mu * np.asarray(fp)

    return scaled, lam / mu


_TAU = {
    "identity": np.eye(5, dtype=int),
    # (f0, f1, f2, f3, f4) -> (-f0, f2, f1, f4, f3)
    "t12": np.array([[-1, 0, 0, 0, 0],
                     [0, 0, 1, 0, 0],
                     [0, 1, 0, 0, 0],
                     [0, 0, 0, 0, 1],
                     [0, 0, 0, 1, 0]]),
    # -> (-f0, f1, -f1 - f2 - 3(f3 + f4), -f1 - f3, f1 + 2 f3 + f4)
    "t13": np.array([[-1, 0, 0, 0, 0],
                     [0, 1, 0, 0, 0],
                     [0, -1, -1, -3, -3],
                     [0, -1, 0, -1, 0],
                     [0, 1, 0, 2, 1]]),
    # -> (-f0, -f1 - f2 - 3(f3 + f4), f2, f2 + f3 + 2 f4, -f2 - f4)
    "t23": np.array([[-1, 0, 0, 0, 0],
                     [0, -1, -1, -3, -3],
                     [0, 0, 1, 0, 0],
                     [0, 0, 1, 1, 2],
                     [0, 0, -1, 0, -1]]),
    # -> (f0, -f1 - f2 - 3(f3 + f4), f1, f1 + 2 f3 + f4, -f1 - f3)
    "t123": np.array([[1, 0, 0, 0, 0],
                      [0, -1, -1, -3, -3],
                      [0, 1, 0, 0, 0],
                      [0, 1, 0, 2, 1],
                      [0, -1, 0, -1, 0]]),
    # -> (f0, f2, -f1 - f2 - 3(f3 + f4), -f2 - f4, f2 + f3 + 2 f4)
    "t132": np.array([[1, 0, 0, 0, 0],
                      [0, 0, 1, 0, 0],
                      [0, -1, -1, -3, -3],
                      [0, 0, -1, 0, -1],
                      [0, 0, 1, 1, 2]]),
}

TAU_NAMES = ("identity", "o", "t12", "t13", "t23", "t123", "t132")


def tau_matrix(tag: str) -> np.ndarray:
    """Integer matrix of a permutation transformation acting on (f0, ..., f4)."""
    try:
        return _TAU[_canonical_tau(tag)].copy()
    except KeyError:
        raise ValueError(f"no linear matrix for transformation {tag!r}") from None


def _canonical_tau(tag: str) -> str:
    tag = str(tag)
    if tag in ("12", "13", "23", "123", "132"):
        return "t" + tag
    if tag in ("id", "e"):
        return "identity"
    return tag


def apply_tau(tag: str, f):
    """Apply a transformation to one coefficient vector.

    For ``"o"`` only the pointwise part (f0 -> -f0) is applied; the time
    reflection t -> -t belongs to :func:`tau_path`.  Works on exact inputs
    (ints, Fractions) as well as floats.
    """
    tag = _canonical_tau(tag)
    if tag == "o":
        return FCoeffs(-f[0], f[1], f[2], f[3], f[4])
    if tag not in _TAU:
        raise ValueError(f"unknown transformation {tag!r}")
    m = _TAU[tag]
    return FCoeffs(*(sum(int(m[i, j]) * f[j] for j in range(5) if m[i, j]) for i in range(5)))


def tau_path(tag: str, path: Path) -> Path:
    """Transform a whole solution path; ``"o"`` also reflects time."""
    tag = _canonical_tau(tag)
    if tag == "o":
        def reflected(t):
            f, fp = path(-t)
            fp = np.asarray(fp, dtype=float)
            return FCoeffs(-f[0], *f[1:]), np.array([fp[0], -fp[1], -fp[2], -fp[3], -fp[4]])
        return reflected
    m = tau_matrix(tag)

    def transformed(t):
        f, fp = path(t)
        return FCoeffs(*(m @ np.asarray(f, dtype=float))), m @ np.asarray(fp, dtype=float)

    return transformed


# ---------------------------------------------------------------------------
# constraint surface

def constraint_roots(f0: float, f1: float, f3: float, lam: float) -> list[FCoeffs]:
    """All real points on R1 = R2 = 0 with the given (f0, f1, f3).

    R1 = 0 fixes f4; R2 = 0 is then quadratic in f2 (linear when f1 = 0).
    Admissibility is not checked here.
    """
    f4 = -f3 - lam / 6.0 * f0**2
    b1 = f1 * f4 - f3**2
    qa = -0.25 * f1**2
    qb = b1 * f3 + 0.5 * f1 * f3 * f4
    qc = -b1 * f4**2 - 0.25 * (f3 * f4) ** 2 - f0**6
    if qa == 0:
        if qb == 0:
            raise Degenerate("f1 = 0 and f3 = 0: R2 = 0 has no solution for f2")
        return [FCoeffs(f0, f1, -qc / qb, f3, f4)]
    disc = qb * qb - 4 * qa * qc
    if disc < 0:
        # a double root can round to a slightly negative discriminant
        if disc < -1e-12 * (qb * qb + abs(4 * qa * qc)):
            return []
        disc = 0.0
    sq = math.sqrt(disc)
    # numerically stable pair of roots
    q = -0.5 * (qb + math.copysign(sq, qb))
    roots = {q / qa, qc / q} if q != 0 else {-qb / (2 * qa)}
    return [FCoeffs(f0, f1, r, f3, f4) for r in sorted(roots)]


def seed_on_constraint(f0: float, f1: float, f3: float, lam: float,
                       reference: FCoeffs | None = None) -> FCoeffs:
    """Point of the constraint set C with prescribed (f0, f1, f3).

    Picks the admissible root of R2 = 0 nearest to ``reference.f2`` when a
    reference is given, otherwise the admissible root of smallest |f2|.
    """
    if f0 == 0:
        raise NonAdmissible("f0 must be nonzero")
    ok = [p for p in constraint_roots(f0, f1, f3, lam) if is_admissible(p)]
    if not ok:
        raise NoAdmissibleRoot(f"no admissible f2 for (f0, f1, f3) = ({f0}, {f1}, {f3})")
    if reference is not None:
        return min(ok, key=lambda p: abs(p.f2 - reference[2]))
    if len(ok) > 1:
        log.info("two admissible roots f2 = %s; taking the smaller |f2|", [p.f2 for p in ok])
    return min(ok, key=lambda p: abs(p.f2))


# ---------------------------------------------------------------------------
# closed-form solutions

class OracleSolution(NamedTuple):
    name: str
    lam: float
    domain: tuple[float, float]
    evaluate: Path

    def __call__(self, t):
        return self.evaluate(t)


_R3 = math.sqrt(3.0)
_R5 = math.sqrt(5.0)


def _sine_cone(t):
    s, c = np.sin(t), np.cos(t)
    f = FCoeffs(-2 * _R3 * s**2, 8 * s**4, 8 * s**4,
                -4 * _R3 * s**3 * (c + s / _R3),
                -4 * _R3 * s**3 * (-c + s / _R3))
    # f3 = -4 sqrt3 s^3 c - 4 s^4, f4 = 4 sqrt3 s^3 c - 4 s^4
    d3c = 3 * s**2 * c * c - s**4
    fp = np.array([-4 * _R3 * s * c, 32 * s**3 * c, 32 * s**3 * c,
                   -4 * _R3 * d3c - 16 * s**3 * c,
                   4 * _R3 * d3c - 16 * s**3 * c])
    return f, fp


def _round_sphere(t):
    s, c = np.sin(t), np.cos(t)
    f34 = -27 * s**2 * c**2
    f = FCoeffs(-9 * s * c, 27 * s**4, 27 * c**4, f34, f34)
    d34 = -27 * 2 * s * c * (c * c - s * s)
    fp = np.array([-9 * (c * c - s * s), 108 * s**3 * c, -108 * c**3 * s, d34, d34])
    return f, fp


def _squashed_sphere(t):
    s, c = np.sin(t), np.cos(t)
    k = 27 / _R5
    s2, c2 = s * s, c * c
    f = FCoeffs(9 / _R5 * s * c,
                k * (3 * s2**2 * c2 - s2**3 / 5),
                k * (3 * c2**2 * s2 - c2**3 / 5),
                k * s2 * c2 * (c2 - 11 / 5 * s2),
                k * s2 * c2 * (s2 - 11 / 5 * c2))
    # d(s^2)/dt = 2sc = -d(c^2)/dt
    sc = s * c
    fp = np.array([
        9 / _R5 * (c2 - s2),
        k * 2 * sc * (6 * s2 * c2 - 3 * s2**2 - 3 / 5 * s2**2),
        k * -2 * sc * (6 * c2 * s2 - 3 * c2**2 - 3 / 5 * c2**2),
        k * 2 * sc * (c2 * (c2 - 11 / 5 * s2) - s2 * (c2 - 11 / 5 * s2) - s2 * c2 * 16 / 5),
        k * 2 * sc * (c2 * (s2 - 11 / 5 * c2) - s2 * (s2 - 11 / 5 * c2) + s2 * c2 * 16 / 5),
    ])
    return f, fp


ORACLES = {
    "sine_cone": OracleSolution("sine_cone", 4.0, (0.0, math.pi), _sine_cone),
    "round_sphere": OracleSolution("round_sphere", 4.0, (0.0, math.pi / 2), _round_sphere),
    "squashed_sphere": OracleSolution("squashed_sphere", 12 / _R5, (0.0, math.pi / 2),
                                      _squashed_sphere),
}


def oracle(name: str, t: float) -> tuple[FCoeffs, np.ndarray, float]:
    """Closed-form coefficients, derivatives and lambda of a known solution.

    Raises
    ------
    OutOfDomain
        If ``t`` lies outside the open interval on which the solution is defined.
    KeyError
        For an unknown solution name.
    """
    sol = ORACLES[name]
    lo, hi = sol.domain
    if not lo < t < hi:
        raise OutOfDomain(f"t = {t} outside ({lo}, {hi}) for {name}")
    f, fp = sol.evaluate(t)
    return f, fp, sol.lam


def normalized_oracle(name: str) -> OracleSolution:
    """The closed-form solution rescaled to lambda = 1 (time stretched by lambda)."""
    sol = ORACLES[name]
    path, lam1 = rescale(sol.evaluate, sol.lam)
    lo, hi = sol.domain
    return OracleSolution(name, lam1, (lo * sol.lam, hi * sol.lam), path)
