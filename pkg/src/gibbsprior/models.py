"""Gibbs-type prior families, their V_{n,k} weights, EPPFs and predictive rules.

A Gibbs-type exchangeable partition assigns to a partition of ``n`` items
into blocks of sizes ``n_1, ..., n_k`` the probability

    V_{n,k} * prod_i (1 - sigma)_{n_i - 1}

where the weights satisfy ``V_{n,k} = (n - sigma k) V_{n+1,k} + V_{n+1,k+1}``
and ``V_{1,1} = 1``.  Each family below only has to say how to evaluate
``log V_{n,k}``; everything else (EPPF, predictive weights, samplers) is
shared.

The normalized sigma-stable process is ``PitmanYor(sigma, 0)``.  The NGG
process is the only family that is both Gibbs-type and a normalized random
measure with independent increments; that fact is not used computationally.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import expit, gammaln

from .combinatorics import log_rising
from .errors import DataError, DomainError, TruncationError

__all__ = [
    "Partition",
    "MixingPMF",
    "GibbsModel",
    "Dirichlet",
    "PitmanYor",
    "NGG",
    "GnedinGamma",
    "MixedFiniteDirichlet",
    "log_V",
    "log_V_row",
    "log_V_table",
    "log_eppf",
    "log_eppf_closed_form",
    "eppf",
    "prob_new",
    "predictive_weights",
    "sample_partition",
    "sample_kn",
    "integer_partitions",
    "partition_multiplicity",
    "AdditionRuleReport",
    "check_addition_rule",
    "GibbsDependenceReport",
    "check_gibbs_dependence",
    "ngg_log_v_series",
    "model_from_dict",
    "parse_model",
]


# --------------------------------------------------------------------------
# partitions


@dataclass(frozen=True)
class Partition:
    """Block sizes of a partition of ``n`` items (order is irrelevant)."""

    frequencies: tuple

    def __init__(self, frequencies: Sequence[int]):
        freqs = tuple(int(f) for f in frequencies)
        if not freqs:
            raise DomainError("a partition needs at least one block")
        if any(f < 1 for f in freqs):
            raise DomainError("block sizes must be positive")
        object.__setattr__(self, "frequencies", freqs)

    @property
    def n(self) -> int:
        return sum(self.frequencies)

    @property
    def k(self) -> int:
        return len(self.frequencies)

    @property
    def freq_counts(self) -> dict:
        """``{i: M_i}``, the number of blocks of size ``i``."""
        return dict(sorted(Counter(self.frequencies).items()))

    @classmethod
    def from_labels(cls, labels) -> "Partition":
        return cls(list(Counter(labels).values()))

    @classmethod
    def from_freq_counts(cls, counts: dict) -> "Partition":
        freqs = []
        for i, m in sorted(counts.items()):
            freqs.extend([int(i)] * int(m))
        return cls(freqs)

    def add_new(self) -> "Partition":
        return Partition(self.frequencies + (1,))

    def add_to(self, j: int) -> "Partition":
        f = list(self.frequencies)
        f[j] += 1
        return Partition(f)


def integer_partitions(n: int, max_part: int | None = None) -> Iterator[tuple]:
    """Integer partitions of ``n`` as non-increasing tuples."""
    if max_part is None:
        max_part = n
    if n == 0:
        yield ()
        return
    for first in range(min(n, max_part), 0, -1):
        for rest in integer_partitions(n - first, first):
            yield (first,) + rest


def partition_multiplicity(freqs: Sequence[int]) -> float:
    """Number of set partitions of ``{1..n}`` with the given block sizes (as a float)."""
    n = sum(freqs)
    out = math.lgamma(n + 1)
    out -= sum(math.lgamma(f + 1) for f in freqs)
    out -= sum(math.lgamma(c + 1) for c in Counter(freqs).values())
    return math.exp(out)


# --------------------------------------------------------------------------
# mixing distributions on the number of species


@dataclass(frozen=True)
class MixingPMF:
    """A pmf on ``{1, 2, ...}`` used to mix finite symmetric Dirichlet models.

    ``kind`` is one of ``poisson`` (positive Poisson, ``param = lambda``),
    ``geometric`` (``param = eta``), ``gnedin`` (``param = gamma``) or
    ``explicit`` (``weights`` over ``m = 1..len(weights)``).
    """

    kind: str
    param: float | None = None
    weights: tuple | None = None
    truncation_tol: float = 1e-12

    def __post_init__(self):
        if self.kind == "poisson":
            if not (self.param and self.param > 0):
                raise DomainError("poisson mixing needs lambda > 0")
        elif self.kind in ("geometric", "gnedin"):
            if self.param is None or not (0 < self.param < 1):
                raise DomainError(f"{self.kind} mixing needs a parameter in (0, 1)")
        elif self.kind == "explicit":
            w = np.asarray(self.weights, dtype=float)
            if w.ndim != 1 or w.size == 0 or np.any(w < 0):
                raise DomainError("explicit weights must be a non-empty non-negative vector")
            if abs(w.sum() - 1) > 1e-12:
                raise DomainError("explicit weights must sum to 1")
            object.__setattr__(self, "weights", tuple(float(x) for x in w))
        else:
            raise DomainError(f"unknown mixing kind {self.kind!r}")

    @classmethod
    def poisson(cls, lam: float, **kw) -> "MixingPMF":
        return cls("poisson", float(lam), **kw)

    @classmethod
    def geometric(cls, eta: float, **kw) -> "MixingPMF":
        return cls("geometric", float(eta), **kw)

    @classmethod
    def gnedin(cls, gamma: float, **kw) -> "MixingPMF":
        return cls("gnedin", float(gamma), **kw)

    @classmethod
    def explicit(cls, weights, **kw) -> "MixingPMF":
        return cls("explicit", None, tuple(weights), **kw)

    @property
    def support_max(self) -> int | None:
        if self.kind == "explicit":
            return len(self.weights)
        return None

    def log_pmf(self, m):
        m = np.asarray(m, dtype=float)
        if self.kind == "poisson":
            lam = self.param
            out = -lam - math.log(-math.expm1(-lam)) + m * math.log(lam) - gammaln(m + 1)
        elif self.kind == "geometric":
            out = math.log1p(-self.param) + (m - 1) * math.log(self.param)
        elif self.kind == "gnedin":
            g = self.param
            out = math.log(g) + log_rising(1 - g, m - 1) - gammaln(m + 1)
        else:
            w = np.asarray(self.weights)
            idx = m.astype(int) - 1
            inside = (idx >= 0) & (idx < w.size)
            with np.errstate(divide="ignore"):
                out = np.where(inside, np.log(w[np.clip(idx, 0, w.size - 1)]), -np.inf)
        return np.where(m >= 1, out, -np.inf)

    def pmf(self, m):
        return np.exp(self.log_pmf(m))

    def ratio(self, m):
        """``pi(m+1) / pi(m)``."""
        m = np.asarray(m, dtype=float)
        return np.exp(self.log_pmf(m + 1) - self.log_pmf(m))

    def truncated_weights(self, max_terms: int = 10_000_000) -> np.ndarray:
        """``pi(1), ..., pi(M)`` with ``M`` the first point where the tail mass is below tol."""
        if self.kind == "explicit":
            return np.asarray(self.weights)
        m = 1
        block = 256
        while m <= max_terms:
            ms = np.arange(1, m + block)
            w = self.pmf(ms)
            tail = 1.0 - w.sum()
            if self.kind == "gnedin":
                tail = math.exp(float(log_rising(1 - self.param, ms[-1]) - gammaln(ms[-1] + 1)))
            if tail <= self.truncation_tol:
                return w
            m += block
            block *= 2
        raise TruncationError(f"{self.kind} mixing tail stays above {self.truncation_tol}")

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "poisson":
            d["lambda"] = self.param
        elif self.kind == "geometric":
            d["eta"] = self.param
        elif self.kind == "gnedin":
            d["gamma"] = self.param
        else:
            d["weights"] = list(self.weights)
        d["truncation_tol"] = self.truncation_tol
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MixingPMF":
        tol = d.get("truncation_tol", 1e-12)
        kind = d["kind"]
        if kind == "poisson":
            return cls.poisson(d["lambda"], truncation_tol=tol)
        if kind == "geometric":
            return cls.geometric(d["eta"], truncation_tol=tol)
        if kind == "gnedin":
            return cls.gnedin(d["gamma"], truncation_tol=tol)
        if kind == "explicit":
            return cls.explicit(d["weights"], truncation_tol=tol)
        raise DomainError(f"unknown mixing kind {kind!r}")


# --------------------------------------------------------------------------
# model families


class GibbsModel:
    """Base class; subclasses are frozen dataclasses providing ``_log_v_row``."""

    family: str = ""

    @property
    def sigma(self) -> float:
        raise NotImplementedError

    def max_clusters(self) -> float:
        """Largest reachable number of clusters (``inf`` when unbounded)."""
        return math.inf

    def _log_v_row(self, n: int, k: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass(frozen=True)
class Dirichlet(GibbsModel):
    theta: float
    family = "dirichlet"

    def __post_init__(self):
        if not self.theta > 0:
            raise DomainError("Dirichlet process needs theta > 0")

    @property
    def sigma(self) -> float:
        return 0.0

    def _log_v_row(self, n, k):
        return k * math.log(self.theta) - log_rising(self.theta, n)

    def to_dict(self):
        return {"family": "dirichlet", "theta": self.theta}


@dataclass(frozen=True)
class PitmanYor(GibbsModel):
    sigma_: float = field(metadata={"name": "sigma"})
    theta: float
    family = "pitman_yor"

    def __init__(self, sigma: float, theta: float):
        object.__setattr__(self, "sigma_", float(sigma))
        object.__setattr__(self, "theta", float(theta))
        s, t = self.sigma_, self.theta
        if 0 <= s < 1:
            if not t > -s:
                raise DomainError("Pitman-Yor with sigma in [0,1) needs theta > -sigma")
            if s == 0 and t == 0:
                raise DomainError("sigma = theta = 0 is degenerate")
        elif s < 0:
            m = t / abs(s)
            if not (m >= 1 and abs(m - round(m)) < 1e-9):
                raise DomainError("Pitman-Yor with sigma < 0 needs theta = m|sigma|, m a positive integer")
        else:
            raise DomainError("Pitman-Yor needs sigma < 1")

    @property
    def sigma(self) -> float:
        return self.sigma_

    def __repr__(self):
        return f"PitmanYor(sigma={self.sigma_!r}, theta={self.theta!r})"

    @property
    def n_species(self) -> int | None:
        """Number of species ``m`` when ``sigma < 0``."""
        if self.sigma_ < 0:
            return int(round(self.theta / abs(self.sigma_)))
        return None

    def max_clusters(self):
        m = self.n_species
        return math.inf if m is None else m

    def _log_v_row(self, n, k):
        s, t = self.sigma_, self.theta
        k = np.asarray(k)
        if s == 0:
            return k * math.log(t) - log_rising(t, n)
        denom = log_rising(t + 1, n - 1)
        if s > 0:
            if t / s < 1e4:
                # prod_{i=1}^{k-1} (theta + i sigma) = sigma^{k-1} (theta/sigma + 1)_{k-1}
                num = (k - 1) * math.log(s) + log_rising(t / s + 1, k - 1)
            else:
                # the gamma-function difference cancels badly as sigma -> 0
                steps = np.log(t) + np.log1p(s / t * np.arange(1, max(int(k.max()), 1)))
                num = np.concatenate(([0.0], np.cumsum(steps)))[k - 1]
            return num - denom
        m = self.n_species
        a = abs(s)
        kk = np.minimum(k, m)
        num = (kk - 1) * math.log(a) + gammaln(m) - gammaln(m - kk + 1)
        return np.where(k <= m, num - denom, -np.inf)

    def to_dict(self):
        return {"family": "pitman_yor", "sigma": self.sigma_, "theta": self.theta}


@dataclass(frozen=True)
class NGG(GibbsModel):
    """Normalized generalized gamma process, ``sigma in (0,1)``, ``beta > 0``.

    ``V_{n,k}`` is evaluated from the positive integral representation

        (sigma beta)^k / Gamma(n) * int_0^inf x^{n-1} (1+x)^{k sigma - n}
                                     exp(-beta((1+x)^sigma - 1)) dx

    with the substitution ``x = e^s``; the integrand is log-concave in ``s``
    so a trapezoid rule on the mode-centred window is spectrally accurate.
    The alternating incomplete-gamma sum (:func:`ngg_log_v_series`) is kept
    as an independent high-precision check.
    """

    sigma_: float
    beta: float
    family = "ngg"

    def __init__(self, sigma: float, beta: float):
        object.__setattr__(self, "sigma_", float(sigma))
        object.__setattr__(self, "beta", float(beta))
        if not 0 < self.sigma_ < 1:
            raise DomainError("NGG needs sigma in (0, 1)")
        if not self.beta > 0:
            raise DomainError("NGG needs beta > 0")

    @property
    def sigma(self) -> float:
        return self.sigma_

    def __repr__(self):
        return f"NGG(sigma={self.sigma_!r}, beta={self.beta!r})"

    def _log_v_row(self, n, k):
        k = np.asarray(k, dtype=float)
        shape = k.shape
        k = k.ravel()
        out = np.full(k.shape, -np.inf)
        ok = (k >= 1) & (k <= n)
        if np.any(ok):
            if 4 * ok.sum() < n:
                out[ok] = _ngg_log_v_quadrature(self.sigma_, self.beta, int(n), k[ok])
            else:
                out[ok] = _ngg_log_v_cached(self.sigma_, self.beta, int(n))[k[ok].astype(int) - 1]
        return out.reshape(shape)

    def to_dict(self):
        return {"family": "ngg", "sigma": self.sigma_, "beta": self.beta}


@lru_cache(maxsize=4096)
def _ngg_log_v_cached(sigma: float, beta: float, n: int) -> np.ndarray:
    out = _ngg_log_v_quadrature(sigma, beta, n, np.arange(1, n + 1, dtype=float))
    out.flags.writeable = False
    return out


def _ngg_log_v_quadrature(sigma, beta, n, k, n_grid=1201, drop=50.0):
    a = k * sigma - n  # <= 0 for every admissible (n, k)

    def h(s, a=a):
        L = np.logaddexp(0.0, s)
        return n * s + a * L - beta * np.expm1(sigma * L)

    def dh(s):
        L = np.logaddexp(0.0, s)
        p = expit(s)
        return n + a * p - beta * sigma * np.exp(sigma * L) * p

    shape = (k.size,)
    lo = np.full(shape, -60.0)
    hi = np.full(shape, 8.0)
    for _ in range(64):
        grow = dh(hi) > 0
        if not grow.any():
            break
        hi = np.where(grow, 2 * hi + 8, hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        pos = dh(mid) > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
        if np.max(hi - lo) < 1e-12 * np.maximum(1.0, np.max(np.abs(hi))):
            break
    mode = 0.5 * (lo + hi)
    hmax = h(mode)

    def edge(direction):
        step = np.ones(shape)
        for _ in range(80):
            far = h(mode + direction * step) > hmax - drop
            if not far.any():
                break
            step = np.where(far, 2 * step, step)
        near = np.zeros(shape)
        for _ in range(60):
            mid = 0.5 * (near + step)
            far = h(mode + direction * mid) > hmax - drop
            near = np.where(far, mid, near)
            step = np.where(far, step, mid)
        return mode + direction * step

    left, right = edge(-1.0), edge(1.0)
    t = np.linspace(0.0, 1.0, n_grid)
    s = left[:, None] + (right - left)[:, None] * t[None, :]
    vals = np.exp(h(s, a[:, None]) - hmax[:, None])
    integral = trapezoid(vals, s, axis=1)
    return k * math.log(sigma * beta) - gammaln(n) + hmax + np.log(integral)


def ngg_log_v_series(sigma: float, beta: float, n: int, k: int, dps: int | None = None) -> float:
    """``log V_{n,k}`` for the NGG from the alternating incomplete-gamma sum.

    Evaluated with mpmath at a precision large enough to absorb the
    cancellation between the ``n`` binomial terms.  Slow; used as an oracle.
    """
    import mpmath

    if dps is None:
        dps = 40 + int(n * math.log10(2) + n / sigma * abs(math.log10(beta)) / 2)
    with mpmath.workdps(dps):
        s = mpmath.mpf(sigma)
        b = mpmath.mpf(beta)
        tot = mpmath.mpf(0)
        for i in range(n):
            tot += (-1) ** i * mpmath.binomial(n - 1, i) * b ** (i / s) * mpmath.gammainc(k - i / s, b)
        v = mpmath.e ** b * s ** (k - 1) / mpmath.gamma(n) * tot
        return float(mpmath.log(v))


@dataclass(frozen=True)
class GnedinGamma(GibbsModel):
    """Gnedin's model: ``sigma = -1`` with heavy-tailed mixing over the number of species."""

    gamma: float
    family = "gnedin"

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise DomainError("Gnedin model needs gamma in (0, 1)")

    @property
    def sigma(self) -> float:
        return -1.0

    def _log_v_row(self, n, k):
        g = self.gamma
        k = np.asarray(k, dtype=float)
        return (gammaln(k) + log_rising(1 - g, k - 1) + log_rising(g, n - k)
                - gammaln(n) - log_rising(1 + g, n - 1))

    def to_dict(self):
        return {"family": "gnedin", "gamma": self.gamma}


@dataclass(frozen=True)
class MixedFiniteDirichlet(GibbsModel):
    """Mixture over ``m`` of ``PitmanYor(-abs_sigma, m*abs_sigma)`` with weights ``pi(m)``."""

    abs_sigma: float
    mixing: MixingPMF
    family = "mixed_finite_dirichlet"

    def __post_init__(self):
        if not self.abs_sigma > 0:
            raise DomainError("abs_sigma must be positive")

    @property
    def sigma(self) -> float:
        return -self.abs_sigma

    def max_clusters(self):
        sm = self.mixing.support_max
        return math.inf if sm is None else sm

    def _log_v_row(self, n, k):
        k = np.atleast_1d(np.asarray(k, dtype=int))
        out = np.array([self._log_v_single(n, int(kk)) for kk in k.ravel()])
        return out.reshape(k.shape)

    def _log_v_single(self, n, k):
        mix = self.mixing
        if mix.kind == "gnedin" and self.abs_sigma == 1.0:
            # closed form; the m^{-1-gamma} tail is too heavy to truncate
            return float(GnedinGamma(mix.param)._log_v_row(n, np.asarray(k)))
        if k > self.max_clusters():
            return -math.inf
        a = self.abs_sigma
        tol = mix.truncation_tol

        def log_terms(ms):
            return (mix.log_pmf(ms) + (k - 1) * math.log(a) + gammaln(ms) - gammaln(ms - k + 1)
                    - log_rising(ms * a + 1, n - 1))

        if mix.kind == "explicit":
            ms = np.arange(k, mix.support_max + 1, dtype=float)
            return float(np.logaddexp.reduce(log_terms(ms)))

        start = k
        block = max(256, 2 * n)
        acc = -math.inf
        while start < 10_000_000:
            ms = np.arange(start, start + block, dtype=float)
            lt = log_terms(ms)
            acc = float(np.logaddexp(acc, np.logaddexp.reduce(lt)))
            m_last = ms[-1]
            if mix.kind == "gnedin":
                p = 1 + mix.param + n - k
                log_tail = lt[-1] + math.log(m_last / (p - 1))
            else:
                # term ratio is bounded by pi(m+1)/pi(m) * m/(m-k+1), non-increasing in m
                r = float(mix.ratio(m_last)) * m_last / (m_last - k + 1)
                log_tail = lt[-1] + math.log(r / (1 - r)) if r < 1 else math.inf
            if log_tail - acc <= math.log(tol):
                return acc
            start += block
            block *= 2
        raise TruncationError(
            f"mixture over the number of species did not reach tolerance {tol} for (n={n}, k={k})")

    def to_dict(self):
        return {"family": "mixed_finite_dirichlet", "abs_sigma": self.abs_sigma,
                "mixing": self.mixing.to_dict()}


# --------------------------------------------------------------------------
# weights and EPPF


def _check_nk(model, n, k):
    if n < 1 or k < 1 or k > n:
        raise DomainError(f"need 1 <= k <= n, got n={n}, k={k}")


def log_V(model: GibbsModel, n: int, k: int) -> float:
    """``log V_{n,k}``; ``-inf`` for configurations of probability zero."""
    _check_nk(model, n, k)
    return float(np.asarray(model._log_v_row(int(n), np.asarray([k])))[0])


def log_V_row(model: GibbsModel, n: int, ks=None) -> np.ndarray:
    """``log V_{n,k}`` for ``k`` in ``ks`` (default ``1..n``)."""
    if ks is None:
        ks = np.arange(1, n + 1)
    ks = np.asarray(ks)
    if ks.size and (ks.min() < 1 or ks.max() > n):
        raise DomainError("k out of range")
    return np.asarray(model._log_v_row(int(n), ks), dtype=float)


def log_V_table(model: GibbsModel, n_max: int) -> np.ndarray:
    """Array ``T[n, k] = log V_{n,k}`` for ``1 <= k <= n <= n_max`` (``-inf`` elsewhere).

    The top row comes from the family formula; lower rows follow from the
    forward recursion, whose terms are all non-negative.
    """
    T = np.full((n_max + 1, n_max + 2), -np.inf)
    T[n_max, 1:n_max + 1] = log_V_row(model, n_max)
    s = model.sigma
    for n in range(n_max - 1, 0, -1):
        k = np.arange(1, n + 1)
        with np.errstate(divide="ignore"):
            T[n, 1:n + 1] = np.logaddexp(np.log(n - s * k) + T[n + 1, 1:n + 1], T[n + 1, 2:n + 2])
    return T


def log_eppf(model: GibbsModel, p: Partition) -> float:
    """Log probability of one specific set partition with block sizes ``p``."""
    s = model.sigma
    f = np.asarray(p.frequencies, dtype=float)
    return log_V(model, p.n, p.k) + float(np.sum(log_rising(1 - s, f - 1)))


def eppf(model: GibbsModel, p: Partition) -> float:
    return math.exp(log_eppf(model, p))


def log_eppf_closed_form(model: GibbsModel, p: Partition) -> float:
    """Direct Dirichlet / Pitman-Yor EPPF formulas, independent of ``log_V``."""
    f = np.asarray(p.frequencies, dtype=float)
    if isinstance(model, Dirichlet):
        t = model.theta
        return p.k * math.log(t) - float(log_rising(t, p.n)) + float(np.sum(gammaln(f)))
    if isinstance(model, PitmanYor):
        s, t = model.sigma, model.theta
        num = sum(math.log(abs(t + i * s)) if t + i * s != 0 else -math.inf for i in range(1, p.k))
        if any(t + i * s <= 0 for i in range(1, p.k)):
            return -math.inf
        den = float(log_rising(t + 1, p.n - 1))
        blocks = sum(math.lgamma(fi - s) - math.lgamma(1 - s) for fi in f)
        return num - den + blocks
    raise TypeError("closed form only for Dirichlet and Pitman-Yor")


def prob_new(model: GibbsModel, n: int, k: int) -> float:
    """``V_{n+1,k+1} / V_{n,k}``: probability the next draw opens a new block."""
    _check_nk(model, n, k)
    if isinstance(model, Dirichlet):
        return model.theta / (model.theta + n)
    if isinstance(model, PitmanYor) and model.sigma >= 0:
        return (model.theta + model.sigma * k) / (model.theta + n)
    if k + 1 > model.max_clusters():
        return 0.0
    lo = log_V(model, n, k)
    if lo == -math.inf:
        raise DomainError(f"(n={n}, k={k}) has probability zero under {model!r}")
    return math.exp(log_V(model, n + 1, k + 1) - lo)


def predictive_weights(model: GibbsModel, p: Partition):
    """``(w_new, w_old)`` of the one-step predictive rule."""
    n, k = p.n, p.k
    lo = log_V(model, n, k)
    if lo == -math.inf:
        raise DomainError("partition has probability zero under this model")
    w_new = prob_new(model, n, k)
    ratio_old = math.exp(log_V(model, n + 1, k) - lo)
    w_old = ratio_old * (np.asarray(p.frequencies, dtype=float) - model.sigma)
    return w_new, w_old


@lru_cache(maxsize=64)
def _prob_new_table(model: GibbsModel, n_max: int) -> np.ndarray:
    """``P[j, k]`` = probability of a new block after ``j`` draws showing ``k`` blocks."""
    T = log_V_table(model, n_max + 1)
    P = np.zeros((n_max + 1, n_max + 2))
    for j in range(1, n_max + 1):
        with np.errstate(invalid="ignore"):
            P[j, 1:j + 1] = np.where(np.isfinite(T[j, 1:j + 1]),
                                     np.exp(T[j + 1, 2:j + 2] - T[j, 1:j + 1]), 0.0)
    P = np.clip(P, 0.0, 1.0)
    P.flags.writeable = False
    return P


def sample_partition(model: GibbsModel, n: int, rng: np.random.Generator) -> Partition:
    """Draw block sizes of a partition of ``n`` by sequential prediction."""
    if n < 1:
        raise DomainError("n must be positive")
    P = _prob_new_table(model, n)
    s = model.sigma
    freqs = [1]
    for j in range(1, n):
        k = len(freqs)
        if rng.random() < P[j, k]:
            freqs.append(1)
        else:
            w = np.asarray(freqs, dtype=float) - s
            idx = rng.choice(k, p=w / w.sum())
            freqs[idx] += 1
    return Partition(freqs)


def sample_kn(model: GibbsModel, n: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``size`` independent copies of the number of blocks ``K_n``.

    ``K_n`` is a Markov chain in the sample size under a Gibbs-type prior, so
    the block sizes never need to be tracked.  Dirichlet and Pitman-Yor
    (``sigma >= 0``) use their closed-form rule and scale to large ``n``;
    other families tabulate ``V`` up to ``n``.
    """
    if n < 1:
        raise DomainError("n must be positive")
    k = np.ones(size, dtype=int)
    if isinstance(model, (Dirichlet, PitmanYor)) and model.sigma >= 0:
        s, t = model.sigma, model.theta
        for j in range(1, n):
            k += rng.random(size) < (t + s * k) / (t + j)
        return k
    P = _prob_new_table(model, n)
    for j in range(1, n):
        k += rng.random(size) < P[j, k]
    return k


# --------------------------------------------------------------------------
# structural checks


@dataclass
class AdditionRuleReport:
    n_max: int
    n_partitions: int
    max_violation: float
    tol: float = 1e-9

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tol


def check_addition_rule(model: GibbsModel, n_max: int, tol: float = 1e-9) -> AdditionRuleReport:
    """Exhaustively check ``p(n) = p(n.., 1) + sum_j p(.., n_j + 1, ..)`` for ``n <= n_max``."""
    if n_max > 12:
        raise DomainError("exhaustive enumeration is limited to n_max <= 12")
    worst = 0.0
    count = 0
    for n in range(1, n_max + 1):
        for freqs in integer_partitions(n):
            p = Partition(freqs)
            lhs = eppf(model, p)
            rhs = eppf(model, p.add_new()) if p.k + 1 <= model.max_clusters() else 0.0
            rhs += sum(eppf(model, p.add_to(j)) for j in range(p.k))
            worst = max(worst, abs(lhs - rhs))
            count += 1
    return AdditionRuleReport(n_max, count, worst, tol)


@dataclass
class GibbsDependenceReport:
    n: int
    frequency_spread: float  # max over k of the spread of P(new) across block sizes
    k_spread: float  # spread of P(new) across k
    exchangeability_gap: float  # two-step predictive symmetry defect
    tol: float = 1e-10

    @property
    def frequency_invariant(self) -> bool:
        return self.frequency_spread <= self.tol

    @property
    def k_invariant(self) -> bool:
        return self.k_spread <= self.tol

    @property
    def exchangeable(self) -> bool:
        return self.exchangeability_gap <= self.tol


def check_gibbs_dependence(model: GibbsModel, n: int) -> GibbsDependenceReport:
    """Numerical version of the new-value classification of species sampling models.

    P(new) is computed as the EPPF ratio ``p(n.., 1) / p(n..)`` for every
    block-size vector of ``n`` items, without using the Gibbs factorization.
    """
    if n > 12:
        raise DomainError("enumeration is limited to n <= 12")
    by_k: dict[int, list] = {}
    gap = 0.0
    for freqs in integer_partitions(n):
        p = Partition(freqs)
        if p.k > model.max_clusters():
            continue
        base = log_eppf(model, p)
        if base == -math.inf:
            continue
        if p.k + 1 <= model.max_clusters():
            pn = math.exp(log_eppf(model, p.add_new()) - base)
        else:
            pn = 0.0
        by_k.setdefault(p.k, []).append(pn)
        # new-then-join-j versus join-j-then-new
        w_new, w_old = predictive_weights(model, p)
        for j in range(p.k):
            if w_new > 0:
                _, w_old2 = predictive_weights(model, p.add_new())
                a = w_new * w_old2[j]
            else:
                a = 0.0
            w_new2, _ = predictive_weights(model, p.add_to(j))
            b = w_old[j] * w_new2
            gap = max(gap, abs(a - b))
    freq_spread = max(max(v) - min(v) for v in by_k.values())
    reps = [v[0] for v in by_k.values()]
    return GibbsDependenceReport(n, float(freq_spread), float(max(reps) - min(reps)), float(gap))


# --------------------------------------------------------------------------
# serialization


_ALIASES = {
    "dp": "dirichlet", "dirichlet": "dirichlet",
    "py": "pitman_yor", "pitman_yor": "pitman_yor", "pitmanyor": "pitman_yor",
    "ngg": "ngg",
    "gnedin": "gnedin",
    "mfd": "mixed_finite_dirichlet", "mixed_finite_dirichlet": "mixed_finite_dirichlet",
}


def model_from_dict(d: dict) -> GibbsModel:
    family = _ALIASES.get(str(d.get("family", "")).lower())
    if family == "dirichlet":
        return Dirichlet(float(d["theta"]))
    if family == "pitman_yor":
        return PitmanYor(float(d["sigma"]), float(d["theta"]))
    if family == "ngg":
        return NGG(float(d["sigma"]), float(d["beta"]))
    if family == "gnedin":
        return GnedinGamma(float(d["gamma"]))
    if family == "mixed_finite_dirichlet":
        return MixedFiniteDirichlet(float(d["abs_sigma"]), MixingPMF.from_dict(d["mixing"]))
    raise DomainError(f"unknown model family {d.get('family')!r}")


def parse_model(spec: str) -> GibbsModel:
    """Build a model from inline ``family:p1,p2``, a JSON string, or a JSON file path.

    Inline forms: ``dp:THETA``, ``py:SIGMA,THETA``, ``ngg:SIGMA,BETA``,
    ``gnedin:GAMMA``, ``mfd:ABS_SIGMA,poisson,LAMBDA`` (or ``geometric,ETA`` /
    ``gnedin,GAMMA``).
    """
    spec = spec.strip()
    if spec.startswith("{"):
        return model_from_dict(json.loads(spec))
    path = Path(spec)
    if spec.endswith(".json") or (path.suffix and path.exists()):
        try:
            text = path.read_text()
        except OSError as exc:
            raise DataError(f"cannot read {path}: {exc.strerror}") from exc
        return model_from_dict(json.loads(text))
    name, _, rest = spec.partition(":")
    family = _ALIASES.get(name.lower())
    args = [a.strip() for a in rest.split(",")] if rest else []
    try:
        if family == "dirichlet":
            return Dirichlet(float(args[0]))
        if family == "pitman_yor":
            return PitmanYor(float(args[0]), float(args[1]))
        if family == "ngg":
            return NGG(float(args[0]), float(args[1]))
        if family == "gnedin":
            return GnedinGamma(float(args[0]))
        if family == "mixed_finite_dirichlet":
            kind = args[1].lower()
            key = {"poisson": "lambda", "geometric": "eta", "gnedin": "gamma"}[kind]
            return MixedFiniteDirichlet(float(args[0]),
                                        MixingPMF.from_dict({"kind": kind, key: float(args[2])}))
    except (IndexError, KeyError, ValueError) as exc:
        if isinstance(exc, DomainError):
            raise
        raise DomainError(f"malformed model spec {spec!r}") from exc
    raise DomainError(f"unknown model family in {spec!r}")
