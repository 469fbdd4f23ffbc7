"""Desingularized system at the singular orbit and its power-series startup.

With ``f0 = t h0, f1 = t^4 h1, f2 = h2, f3 = t^2 h3, f4 = t^2 h4`` and
``h4 = -h3 - (lambda/6) h0^2`` the regular system becomes

    h' = A(h) / t + B(h, t),     h(0) = (a, 27 lambda / 4, -a^3 / 27, 3a),

a singular initial value problem whose smooth solution is even in t.  The
startup series is computed with truncated power-series ("jet") arithmetic:
matching the t^(2k-1) coefficient gives

    (2k I - dA) c_2k = [A(h_<2k)]_2k + [B(h_<2k, t)]_(2k-1),

which is always solvable since dA has eigenvalues 0, -1, -4, -6.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import mpmath
import numpy as np

from .algebra import FCoeffs
from .errors import SingularRecurrence, ZeroA, ZeroH0


class HState(NamedTuple):
    h0: float
    h1: float
    h2: float
    h3: float

    def h4(self, lam: float) -> float:
        return -self.h3 - lam / 6.0 * self.h0**2


class InitialData(NamedTuple):
    a: float
    lam: float
    hbar: HState


class Jet:
    """Power series in t truncated after degree ``n``.

    Supports the ring operations needed by the vector field: +, -, *,
    integer powers (negative ones through the series reciprocal) and
    scalar division.
    """

    __slots__ = ("c",)

    def __init__(self, coeffs):
        self.c = np.asarray(coeffs, dtype=float)

    @classmethod
    def constant(cls, value, n):
        c = np.zeros(n + 1)
        c[0] = value
        return cls(c)

    @classmethod
    def variable(cls, n):
        c = np.zeros(n + 1)
        if n >= 1:
            c[1] = 1.0
        return cls(c)

    @property
    def degree(self):
        return len(self.c) - 1

    def _coerce(self, other):
        if isinstance(other, Jet):
            return other.c
        out = np.zeros_like(self.c)
        out[0] = other
        return out

    def __add__(self, other):
        return Jet(self.c + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Jet(self.c - self._coerce(other))

    def __rsub__(self, other):
        return Jet(self._coerce(other) - self.c)

    def __neg__(self):
        return Jet(-self.c)

    def __mul__(self, other):
        if isinstance(other, Jet):
            return Jet(np.convolve(self.c, other.c)[: len(self.c)])
        return Jet(self.c * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return Jet(self.c / other)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def reciprocal(self):
        c = self.c
        if c[0] == 0:
            raise ZeroDivisionError("jet with zero constant term has no reciprocal")
        r = np.zeros_like(c)
        r[0] = 1.0 / c[0]
        for k in range(1, len(c)):
            r[k] = -np.dot(c[1:k + 1], r[k - 1::-1][:k]) / c[0]
        return Jet(r)

    def __pow__(self, n):
        if not isinstance(n, (int, np.integer)):
            return NotImplemented
        if n < 0:
            return self.reciprocal() ** (-n)
        out = Jet.constant(1.0, self.degree)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __getitem__(self, k):
        return self.c[k]

    def __repr__(self):
        return f"Jet({self.c.tolist()})"


def f_from_h(h, t: float, lam: float) -> FCoeffs:
    h0, h1, h2, h3 = h
    h4 = -h3 - lam / 6.0 * h0**2
    t2 = t * t
    return FCoeffs(t * h0, t2 * t2 * h1, h2, t2 * h3, t2 * h4)


def h_from_f(f, t: float) -> HState:
    """Inverse of :func:`f_from_h` for t != 0 (h4 is dropped)."""
    t2 = t * t
    return HState(f[0] / t, f[1] / (t2 * t2), f[2], f[3] / t2)


def _check_h0(h0):
    if not isinstance(h0, Jet) and h0 == 0:
        raise ZeroH0("h0 = 0: the vector field is singular")


def A_field(h, lam: float):
    """Singular part ``A(h)``; the system reads ``h' = A(h)/t + B(h, t)``.

    Works on floats and on :class:`Jet` components alike.
    """
    h0, h1, h2, h3 = h
    _check_h0(h0)
    return (-h0 - 3 * h2 * h3**2 * h0**-4,
            -4 * h1 + lam * h3**3 * h0**-3,
            0 * h1,
            -2 * h3 + 6 * h0)


def B_field(h, t, lam: float):
    """Regular, odd-in-t remainder ``B(h, t)`` of the desingularized system."""
    h0, h1, h2, h3 = h
    _check_h0(h0)
    h4 = -h3 - lam / 6.0 * h0**2
    t2 = t * t
    k = lam * t * h0**-3
    return (
        -1.5 * h0**-4 * (t * (h3 - h4) * (h1 * h2 + h3 * h4) - 2 * t * t2 * h1 * h4**2),
        0.5 * k * (h1**2 * h2 - 3 * h1 * h3 * h4),
        k * (h4 * (h2 * h3 - t2 * h4**2) - 0.5 * h2 * (h1 * h2 - h3 * h4)),
        0.5 * k * (h1 * h2 * h3 + h3**2 * h4 - 2 * t2 * h1 * h4**2),
    )


def rhs_h(h, t: float, lam: float) -> np.ndarray:
    a = A_field(h, lam)
    b = B_field(h, t, lam)
    return np.array([a[i] / t + b[i] for i in range(4)])


def rhs_h_array(y: np.ndarray, t: float, lam: float) -> np.ndarray:
    """Unchecked ``A(h)/t + B(h, t)`` on a raw 4-vector (integrator hot path)."""
    h0, h1, h2, h3 = y
    h4 = -h3 - lam / 6.0 * h0 * h0
    t2 = t * t
    i0 = 1.0 / h0
    i3 = i0 * i0 * i0
    i4 = i3 * i0
    k = lam * t * i3
    return np.array([
        (-h0 - 3 * h2 * h3 * h3 * i4) / t
        - 1.5 * i4 * (t * (h3 - h4) * (h1 * h2 + h3 * h4) - 2 * t * t2 * h1 * h4 * h4),
        (-4 * h1 + lam * h3**3 * i3) / t + 0.5 * k * (h1 * h1 * h2 - 3 * h1 * h3 * h4),
        k * (h4 * (h2 * h3 - t2 * h4 * h4) - 0.5 * h2 * (h1 * h2 - h3 * h4)),
        (-2 * h3 + 6 * h0) / t + 0.5 * k * (h1 * h2 * h3 + h3 * h3 * h4 - 2 * t2 * h1 * h4 * h4),
    ])


def initial_state(a: float, lam: float) -> InitialData:
    """Initial data ``hbar`` of the smooth solution with h0(0) = a.

    ``hbar`` is the unique zero of A with h0 = a and h3 = 3 h0, the latter
    being the closing condition 6 f0'(0) = f3''(0) at the singular orbit.
    """
    if a == 0:
        raise ZeroA("the parameter a must be nonzero")
    hbar = HState(float(a), 27.0 * lam / 4.0, -float(a) ** 3 / 27.0, 3.0 * a)
    res = max(abs(v) for v in A_field(hbar, lam))
    scale = max(1.0, abs(a), abs(lam) * 27 / 4)
    assert res <= 1e-12 * scale, f"A(hbar) = {res} != 0"
    return InitialData(float(a), float(lam), hbar)


def jacobian_A(h, lam: float) -> np.ndarray:
    """Analytic Jacobian of :func:`A_field` with respect to (h0, h1, h2, h3)."""
    h0, h1, h2, h3 = h
    _check_h0(h0)
    return np.array([
        [-1 + 12 * h2 * h3**2 / h0**5, 0.0, -3 * h3**2 / h0**4, -6 * h2 * h3 / h0**4],
        [-3 * lam * h3**3 / h0**4, -4.0, 0.0, 3 * lam * h3**2 / h0**3],
        [0.0, 0.0, 0.0, 0.0],
        [6.0, 0.0, 0.0, -2.0],
    ])


def linearization(a: float, lam: float) -> np.ndarray:
    """``dA`` at the initial point; det(dA - l I) = l (l + 4)(l^2 + 7 l + 6)."""
    return jacobian_A(initial_state(a, lam).hbar, lam)


def char_det(dA: np.ndarray, l: float) -> float:
    return float(np.linalg.det(dA - l * np.eye(len(dA))))


@dataclass(frozen=True)
class TruncatedEvenSeries:
    """``h(t) = sum_k coeffs[k] t^(2k)`` for k = 0..order/2."""

    order: int
    coeffs: np.ndarray
    lam: float
    conditioning: tuple[float, ...] = ()

    def __call__(self, t: float) -> np.ndarray:
        x = t * t
        out = np.zeros(4)
        for c in self.coeffs[::-1]:
            out = out * x + c
        return out

    def derivative(self, t: float) -> np.ndarray:
        x = t * t
        out = np.zeros(4)
        for k in range(len(self.coeffs) - 1, 0, -1):
            out = out * x + 2 * k * self.coeffs[k]
        return out * t

    def coefficient(self, power: int) -> np.ndarray:
        """Coefficient vector of t^power (zero for odd powers)."""
        if power % 2 or power // 2 >= len(self.coeffs):
            return np.zeros(4)
        return self.coeffs[power // 2].copy()

    def residual(self, t: float, dps: int | None = None) -> np.ndarray:
        """``h'(t) - A(h(t))/t - B(h(t), t)`` for the truncated series.

        Parameters
        ----------
        t : float
            Evaluation point, nonzero.
        dps : int, optional
            If given, evaluate in mpmath arithmetic with this many decimal
            digits.  In double precision the residual of a high-order series
            bottoms out at the roundoff floor (about 1e-12 relative), which
            hides the truncation error one usually wants to see.
        """
        if dps is None:
            return self.derivative(t) - rhs_h(self(t), t, self.lam)
        with mpmath.workdps(dps):
            tm = mpmath.mpf(t)
            x = tm * tm
            rows = [[mpmath.mpf(float(v)) for v in c] for c in self.coeffs]
            lam = mpmath.mpf(self.lam)
            # the constant row is hbar(a); rebuild it exactly, since the
            # rounding in -a^3/27 would otherwise be amplified by A/t
            a = rows[0][0]
            rows[0] = [a, 27 * lam / 4, -a**3 / 27, 3 * a]
            h = [mpmath.mpf(0)] * 4
            dh = [mpmath.mpf(0)] * 4
            for k in range(len(rows) - 1, -1, -1):
                h = [h[i] * x + rows[k][i] for i in range(4)]
                if k:
                    dh = [dh[i] * x + 2 * k * rows[k][i] for i in range(4)]
            dh = [v * tm for v in dh]
            A = A_field(h, lam)
            B = B_field(h, tm, lam)
            return np.array([float(dh[i] - A[i] / tm - B[i]) for i in range(4)])


def taylor_startup(init: InitialData, order: int = 8) -> TruncatedEvenSeries:
    """Even Taylor jet of the smooth solution through degree ``order``.

    Raises
    ------
    ValueError
        If ``order`` is not an even integer >= 2.
    SingularRecurrence
        If a recurrence matrix ``2k I - dA`` is numerically singular.
    """
    if order < 2 or order % 2:
        raise ValueError(f"series order must be even and >= 2, got {order}")
    lam = init.lam
    dA = jacobian_A(init.hbar, lam)
    jets = [Jet.constant(v, order) for v in init.hbar]
    t = Jet.variable(order)
    conds = []
    for k in range(1, order // 2 + 1):
        n = 2 * k
        A = A_field(jets, lam)
        B = B_field(jets, t, lam)
        rhs = np.array([A[i][n] + B[i][n - 1] for i in range(4)])
        M = n * np.eye(4) - dA
        cond = np.linalg.cond(M)
        if not np.isfinite(cond) or cond > 1e13:
            raise SingularRecurrence(f"recurrence matrix at order {n} has condition {cond:.3e}")
        conds.append(float(cond))
        c = np.linalg.solve(M, rhs)
        for i in range(4):
            jets[i].c[n] = c[i]
    coeffs = np.array([[jets[i].c[2 * k] for i in range(4)] for k in range(order // 2 + 1)])
    return TruncatedEvenSeries(order, coeffs, lam, tuple(conds))
