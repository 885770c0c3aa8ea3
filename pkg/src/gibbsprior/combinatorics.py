"""Special-function kernels in signed log-space.

Rising factorials, generalized factorial coefficients (central and
non-central) and unsigned Stirling numbers of the first kind.  Every
coefficient is returned either as a :class:`SignedLog` scalar or as a
``(sign, log|.|)`` pair of arrays so that very large and very small values
survive the sums used by the partition laws downstream.

The generalized factorial coefficients are produced by the triangular
recurrence

    C(m+1, j; s, g) = (m - g - s*j) C(m, j; s, g) + s C(m, j-1; s, g)

which, once divided by ``s**j``, has only non-negative terms in every regime
used by this package.  The definitional alternating sums are kept as
independent cross-checks (:func:`gen_factorial_sum`).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import mpmath
import numpy as np
from scipy.special import gammaln

__all__ = [
    "SignedLog",
    "CancellationWarning",
    "rising_factorial",
    "log_rising",
    "gen_factorial",
    "noncentral_gen_factorial",
    "stirling1_abs",
    "signed_log_sum",
    "scaled_gfc_table",
    "log_scaled_gfc_row",
    "iter_log_scaled_gfc_rows",
    "log_stirling1_table",
    "gen_factorial_sum",
]

CANCELLATION_RTOL = 1e-10


class CancellationWarning(RuntimeWarning):
    """A signed sum lost most of its significant digits."""


@dataclass(frozen=True)
class SignedLog:
    """A real number stored as ``sign * exp(log_magnitude)``.

    ``sign == 0`` encodes an exact zero; ``log_magnitude`` is then ignored.
    """

    sign: int
    log_magnitude: float = -math.inf

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0 or +1, got {self.sign}")
        if self.sign != 0 and math.isnan(self.log_magnitude):
            raise ValueError("log_magnitude is NaN")
        if self.sign != 0 and self.log_magnitude == -math.inf:
            object.__setattr__(self, "sign", 0)

    @classmethod
    def from_float(cls, x: float) -> "SignedLog":
        if x == 0:
            return cls(0)
        return cls(1 if x > 0 else -1, math.log(abs(x)))

    @classmethod
    def one(cls) -> "SignedLog":
        return cls(1, 0.0)

    @classmethod
    def zero(cls) -> "SignedLog":
        return cls(0)

    def __float__(self) -> float:
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(self.log_magnitude)

    def __mul__(self, other: "SignedLog") -> "SignedLog":
        if self.sign == 0 or other.sign == 0:
            return SignedLog(0)
        return SignedLog(self.sign * other.sign, self.log_magnitude + other.log_magnitude)

    def __truediv__(self, other: "SignedLog") -> "SignedLog":
        if other.sign == 0:
            raise ZeroDivisionError("division by a zero SignedLog")
        if self.sign == 0:
            return SignedLog(0)
        return SignedLog(self.sign * other.sign, self.log_magnitude - other.log_magnitude)

    def __neg__(self) -> "SignedLog":
        return SignedLog(-self.sign, self.log_magnitude)

    def __add__(self, other: "SignedLog") -> "SignedLog":
        return signed_log_sum([self, other])

    def isclose(self, other: "SignedLog", rel_tol: float = 1e-12) -> bool:
        if self.sign != other.sign:
            return False
        if self.sign == 0:
            return True
        return abs(self.log_magnitude - other.log_magnitude) <= rel_tol


def log_rising(x, n):
    """``log (x)_n`` for ``x > 0`` (vectorised over ``x`` and ``n``)."""
    x = np.asarray(x, dtype=float)
    n = np.asarray(n)
    return gammaln(x + n) - gammaln(x)


def rising_factorial(x: float, n: int) -> SignedLog:
    """Rising factorial ``(x)_n = x (x+1) ... (x+n-1)``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if n == 0:
        return SignedLog.one()
    if x > 0:
        return SignedLog(1, float(gammaln(x + n) - gammaln(x)))
    # x <= 0: some factors are non-positive; track the sign factor by factor
    sign = 1
    log_mag = 0.0
    for i in range(n):
        f = x + i
        if f == 0:
            return SignedLog.zero()
        if f < 0:
            sign = -sign
        else:
            # remaining factors are all positive
            log_mag += float(gammaln(x + n) - gammaln(f))
            break
        log_mag += math.log(-f)
    return SignedLog(sign, log_mag)


def _signed_logaddexp(s1, l1, s2, l2):
    """Elementwise ``s1 e^l1 + s2 e^l2`` on signed-log arrays."""
    s1 = np.asarray(s1, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    l1 = np.where(s1 == 0, -np.inf, l1)
    l2 = np.where(s2 == 0, -np.inf, l2)
    hi = np.maximum(l1, l2)
    finite = np.isfinite(hi)
    safe_hi = np.where(finite, hi, 0.0)
    with np.errstate(invalid="ignore", over="ignore", under="ignore"):
        v = s1 * np.exp(l1 - safe_hi) + s2 * np.exp(l2 - safe_hi)
    sign = np.sign(v)
    with np.errstate(divide="ignore"):
        logabs = np.where(sign != 0, safe_hi + np.log(np.abs(v)), -np.inf)
    sign = np.where(finite, sign, 0.0)
    return sign, logabs


def signed_log_sum(terms: Iterable[SignedLog], rtol: float = CANCELLATION_RTOL) -> SignedLog:
    """Stable sum of signed-log terms.

    Positive and negative groups are accumulated separately with
    log-sum-exp and then subtracted.  A :class:`CancellationWarning` is
    emitted when the result is smaller than ``rtol`` times the largest term.
    """
    pos = [t.log_magnitude for t in terms if t.sign > 0]
    neg = [t.log_magnitude for t in terms if t.sign < 0]
    if not pos and not neg:
        return SignedLog.zero()
    lp = float(np.logaddexp.reduce(pos)) if pos else -math.inf
    ln = float(np.logaddexp.reduce(neg)) if neg else -math.inf
    if lp == ln:
        if pos and neg:
            _warn_cancellation()
        return SignedLog.zero()
    big, small, sign = (lp, ln, 1) if lp > ln else (ln, lp, -1)
    diff = small - big
    out = big + math.log1p(-math.exp(diff))
    if pos and neg:
        max_term = max(pos + neg)
        if out - max_term < math.log(rtol):
            _warn_cancellation()
    return SignedLog(sign, out)


def _warn_cancellation():
    warnings.warn("catastrophic cancellation in signed sum", CancellationWarning, stacklevel=3)


@lru_cache(maxsize=32)
def _scaled_gfc_table(m_max: int, sigma: float, gamma: float):
    sign = np.zeros((m_max + 1, m_max + 1))
    logabs = np.full((m_max + 1, m_max + 1), -np.inf)
    sign[0, 0] = 1.0
    logabs[0, 0] = 0.0
    j = np.arange(m_max + 1)
    for m in range(m_max):
        factor = m - gamma - sigma * j[: m + 1]
        fs = np.sign(factor)
        with np.errstate(divide="ignore"):
            fl = np.log(np.abs(factor))
        s_a = sign[m, : m + 1] * fs
        l_a = logabs[m, : m + 1] + fl
        s_b = np.concatenate(([0.0], sign[m, :m]))
        l_b = np.concatenate(([-np.inf], logabs[m, :m]))
        s, l = _signed_logaddexp(s_a, l_a, s_b, l_b)
        sign[m + 1, : m + 1] = s
        logabs[m + 1, : m + 1] = l
        sign[m + 1, m + 1] = sign[m, m]
        logabs[m + 1, m + 1] = logabs[m, m]
    sign.flags.writeable = False
    logabs.flags.writeable = False
    return sign, logabs


def scaled_gfc_table(m_max: int, sigma: float, gamma: float = 0.0):
    """Table of ``C(m, j; sigma, gamma) / sigma**j`` for ``0 <= j <= m <= m_max``.

    Returns ``(sign, logabs)`` arrays of shape ``(m_max+1, m_max+1)``.  The
    scaling by ``sigma**j`` keeps the table finite as ``sigma -> 0`` (where it
    becomes the unsigned Stirling triangle for ``gamma = 0``) and makes every
    entry positive whenever ``m - gamma - sigma*j >= 0``.  Arrays are cached
    per ``(sigma, gamma)`` and read-only.
    """
    if m_max < 0:
        raise ValueError("m_max must be non-negative")
    m_max = int(m_max)
    # small tables are built at power-of-two sizes so nearby requests share a cache entry
    size = m_max if m_max > 512 else max(16, 1 << (m_max - 1).bit_length())
    sign, logabs = _scaled_gfc_table(size, float(sigma), float(gamma))
    return sign[: m_max + 1, : m_max + 1], logabs[: m_max + 1, : m_max + 1]


def iter_log_scaled_gfc_rows(m_max: int, sigma: float, gamma: float = 0.0):
    """Yield rows ``0..m_max`` of ``log(C(m, j; sigma, gamma) / sigma**j)``.

    Each row is a fresh array of length ``m + 1``.  Memory is ``O(m_max)``.
    Requires the positive regime ``i - gamma - sigma*j >= 0`` for all
    ``j <= i < m_max``, which covers every use in the species estimators.
    """
    m_max = int(m_max)
    if m_max < 0:
        raise ValueError("m_max must be non-negative")
    row = np.zeros(1)
    yield row.copy()
    for i in range(m_max):
        factor = i - gamma - sigma * np.arange(i + 1)
        if factor.min() < 0:
            raise ValueError("recurrence leaves the positive regime")
        with np.errstate(divide="ignore"):
            stay = np.append(np.log(factor) + row, -np.inf)
        row = np.logaddexp(stay, np.insert(row, 0, -np.inf))
        yield row.copy()


def log_scaled_gfc_row(m: int, sigma: float, gamma: float = 0.0) -> np.ndarray:
    """Row ``m`` of the scaled coefficient table in ``O(m)`` memory."""
    for row in iter_log_scaled_gfc_rows(m, sigma, gamma):
        pass
    return row


def log_stirling1_table(n_max: int) -> np.ndarray:
    """``log |s(n, k)|`` for ``0 <= k <= n <= n_max`` (``-inf`` off the triangle)."""
    return scaled_gfc_table(n_max, 0.0, 0.0)[1]


def _check_nk(n, k):
    if n < 0 or k < 0:
        raise ValueError("arguments must be non-negative")
    if k > n:
        raise ValueError(f"k={k} exceeds n={n}")


def _sigma_power(sigma: float, j: int) -> SignedLog:
    if j == 0:
        return SignedLog.one()
    if sigma == 0:
        return SignedLog.zero()
    sign = -1 if (sigma < 0 and j % 2 == 1) else 1
    return SignedLog(sign, j * math.log(abs(sigma)))


def noncentral_gen_factorial(m: int, j: int, sigma: float, gamma: float) -> SignedLog:
    """Non-central generalized factorial coefficient ``C(m, j; sigma, gamma)``.

    ``(1/j!) sum_r (-1)^r binom(j, r) (-gamma - sigma r)_m``.
    """
    _check_nk(m, j)
    sign, logabs = scaled_gfc_table(m, sigma, gamma)
    scaled = SignedLog(int(sign[m, j]), float(logabs[m, j]))
    return scaled * _sigma_power(sigma, j)


def gen_factorial(n: int, k: int, sigma: float) -> SignedLog:
    """Generalized factorial coefficient ``C(n, k; sigma)``."""
    return noncentral_gen_factorial(n, k, sigma, 0.0)


def stirling1_abs(n: int, k: int) -> float:
    """``log |s(n, k)|``, the unsigned Stirling number of the first kind."""
    _check_nk(n, k)
    return float(log_stirling1_table(n)[n, k])


def gen_factorial_sum(m: int, j: int, sigma: float, gamma: float = 0.0,
                      rtol: float = 1e-4) -> SignedLog:
    """Definitional alternating sum for ``C(m, j; sigma, gamma)``.

    Evaluated term by term in signed log-space; when the result falls below
    ``rtol`` times the largest term (more than about four digits lost) the
    sum is recomputed with mpmath at a working precision large enough to
    absorb the cancellation.
    """
    _check_nk(m, j)
    terms = []
    log_jfact = math.lgamma(j + 1)
    for r in range(j + 1):
        t = rising_factorial(-gamma - sigma * r, m)
        if t.sign == 0:
            continue
        lb = math.lgamma(j + 1) - math.lgamma(r + 1) - math.lgamma(j - r + 1)
        sign = t.sign * (-1 if r % 2 else 1)
        terms.append(SignedLog(sign, t.log_magnitude + lb - log_jfact))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", CancellationWarning)
        out = signed_log_sum(terms, rtol=rtol)
    if not any(issubclass(w.category, CancellationWarning) for w in caught):
        return out
    # digits lost to cancellation are bounded by the largest term's size
    max_log10 = max(t.log_magnitude for t in terms) / math.log(10)
    return _gen_factorial_sum_mp(m, j, sigma, gamma, int(max(30.0, 2 * max_log10 + 40)))


def _gen_factorial_sum_mp(m, j, sigma, gamma, dps) -> SignedLog:
    with mpmath.workdps(dps):
        s = mpmath.mpf(0)
        sig = mpmath.mpf(sigma)
        gam = mpmath.mpf(gamma)
        for r in range(j + 1):
            s += (-1) ** r * mpmath.binomial(j, r) * mpmath.rf(-gam - sig * r, m)
        s /= mpmath.factorial(j)
        if s == 0:
            return SignedLog.zero()
        return SignedLog(1 if s > 0 else -1, float(mpmath.log(abs(s))))
