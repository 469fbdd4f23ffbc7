"""Pointwise algebra of the SU(2)^3-invariant 3-form.

Along the transverse geodesic an invariant 3-form is

    phi = f0 e^1 ^ omega + f1 e^234 + f2 e^567 + f3 phi_3 + f4 phi_4

with omega = e^25 + e^36 + e^47, phi_3 = e^237 - e^246 + e^345 and
phi_4 = e^267 - e^357 + e^456.  Everything here is a closed-form function of
the five coefficients: the Gram blocks of the bilinear form b_phi, the induced
metric blocks, the Hodge dual *phi, the exterior derivative d phi and the
limit form at the singular orbit.

Four-forms are stored in the invariant basis

    e^1 ^ e^234, e^1 ^ e^567, e^1 ^ phi_3, e^1 ^ phi_4, alpha

where alpha = e^2356 + e^2457 + e^3467.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import NonAdmissible, NotNormalized

#: default absolute tolerance on :func:`g11_residual` for "normalized" data
NORMALIZATION_TOL = 1e-9


class FCoeffs(NamedTuple):
    """Coefficients (f0, ..., f4) of the invariant 3-form at one point."""

    f0: float
    f1: float
    f2: float
    f3: float
    f4: float

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=float)


class GramBlocks(NamedTuple):
    b1: float
    b2: float
    b3: float
    detB: float


class MetricBlocks(NamedTuple):
    """Induced metric ``1 + [[g1 I, g3 I], [g3 I, g2 I]]`` on e_1, (e_2..e_4), (e_5..e_7)."""

    g1: float
    g2: float
    g3: float

    def is_positive_definite(self) -> bool:
        return self.g1 > 0 and self.g1 * self.g2 - self.g3**2 > 0


class FourForm(NamedTuple):
    s1: float
    s2: float
    s3: float
    s4: float
    s5: float

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=float)


class SingularPointForm(NamedTuple):
    """Limit 3-form ``Ap w^123 + Bp (...)`` at the singular orbit."""

    Ap: float
    Bp: float

    @property
    def stable(self) -> bool:
        return self.Ap * self.Bp < 0


def _bracket(f1, f2, f3, f4):
    # the quartic whose cube appears in det(B_phi)
    return (f1**2 * f2**2 - 6 * f1 * f2 * f3 * f4 + 4 * f1 * f4**3
            + 4 * f2 * f3**3 - 3 * f3**2 * f4**2)


def gram_blocks(f: FCoeffs) -> GramBlocks:
    """Blocks of the 7x7 matrix of b_phi and its determinant.

    ``B_phi = f0 * diag(-f0^2, [[b1 I, b3 I], [b3 I, b2 I]])``.
    """
    f0, f1, f2, f3, f4 = f
    b1 = f1 * f4 - f3**2
    b2 = f2 * f3 - f4**2
    b3 = 0.5 * (f1 * f2 - f3 * f4)
    detB = f0**9 * _bracket(f1, f2, f3, f4) ** 3 / 64.0
    return GramBlocks(b1, b2, b3, detB)


def is_admissible(f: FCoeffs) -> bool:
    f0, f1, f2, f3, f4 = f
    return f0 != 0 and f1 * f4 - f3**2 < 0 and f2 * f3 - f4**2 < 0


def g11_residual(f: FCoeffs) -> float:
    """Defect of the arc-length normalization ``g(e_1, e_1) = 1``.

    Returns ``f0^2 + cbrt(bracket / 4)`` with the real (sign-preserving) cube
    root; it vanishes exactly when the curve parameter is arc length.
    """
    f0, f1, f2, f3, f4 = f
    return float(f0**2 + np.cbrt(_bracket(f1, f2, f3, f4) / 4.0))


def _check(f: FCoeffs, tol: float) -> None:
    if not is_admissible(f):
        raise NonAdmissible(f"coefficients {tuple(f)} do not define a G2-structure")
    r = g11_residual(f)
    # relative to f0^2 so that rescaled (lambda = 1) data is judged fairly
    if abs(r) > tol * max(1.0, f[0] ** 2):
        raise NotNormalized(f"g11 residual {r:.3e} exceeds tolerance {tol:.1e}")


def metric_blocks(f: FCoeffs, tol: float = NORMALIZATION_TOL) -> MetricBlocks:
    """Induced metric blocks in arc-length gauge.

    Raises
    ------
    NonAdmissible
        If ``f`` does not satisfy the admissibility inequalities.
    NotNormalized
        If ``f`` is not arc-length normalized within ``tol``.
    """
    _check(f, tol)
    return metric_blocks_unchecked(f)


def metric_blocks_unchecked(f: FCoeffs) -> MetricBlocks:
    f0, f1, f2, f3, f4 = f
    q = f0**2
    return MetricBlocks((f3**2 - f1 * f4) / q,
                        (f4**2 - f2 * f3) / q,
                        (f3 * f4 - f1 * f2) / (2 * q))


def hodge_dual(f: FCoeffs, tol: float = NORMALIZATION_TOL) -> FourForm:
    """The 4-form ``*phi`` in the invariant 4-form basis."""
    _check(f, tol)
    return hodge_dual_unchecked(f)


def hodge_dual_unchecked(f: FCoeffs) -> FourForm:
    f0, f1, f2, f3, f4 = f
    k = 1.0 / (2.0 * f0**3)
    return FourForm(
        k * (f1**2 * f2 - 3 * f1 * f3 * f4 + 2 * f3**3),
        -k * (f1 * f2**2 - 3 * f2 * f3 * f4 + 2 * f4**3),
        k * (f1 * f2 * f3 - 2 * f1 * f4**2 + f3**2 * f4),
        -k * (f1 * f2 * f4 - 2 * f2 * f3**2 + f3 * f4**2),
        -f0**2,
    )


def exterior_derivative(f: FCoeffs, fprime) -> FourForm:
    """``d phi`` from the coefficients and their t-derivatives.

    ``fprime`` is ordered like ``f``: (f0', f1', f2', f3', f4').  Uses
    d omega = 6 (phi_3 - phi_4) and d phi_3 = d phi_4 = 6 alpha.
    """
    f0, _, _, f3, f4 = f
    _, d1, d2, d3, d4 = fprime
    return FourForm(d1, d2, d3 - 6 * f0, d4 + 6 * f0, 6 * (f3 + f4))


def singular_point_form(f2_at_0: float, f0prime_at_0: float) -> SingularPointForm:
    return SingularPointForm(-8.0 / 27.0 * f2_at_0, -2.0 / 9.0 * f0prime_at_0)
