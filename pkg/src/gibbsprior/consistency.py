"""Frequentist behaviour of the new-value probability.

If the data are really iid from a fixed ``P0`` and ``kappa_n`` denotes the
number of distinct values among the first ``n``, the posterior probability
of a new value is ``V_{n+1,kappa_n+1} / V_{n,kappa_n}``.  When this ratio
tends to a limit ``alpha``, the posterior predictive converges weakly to
``alpha P* + (1 - alpha) P0``; it is consistent exactly when ``alpha = 0``.

For a diffuse ``P0`` every draw is new, so ``kappa_n = n`` deterministically.
For discrete truths ``kappa_n`` is simulated.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .models import (NGG, Dirichlet, GibbsModel, GnedinGamma, MixedFiniteDirichlet,
                     MixingPMF, PitmanYor, log_V)

__all__ = [
    "TruthRegime",
    "Trajectory",
    "alpha_trajectory",
    "alpha_theoretical",
    "geometric_alpha",
    "TailReport",
    "check_tail_conditions",
]


@dataclass(frozen=True)
class TruthRegime:
    """``diffuse``, ``uniform`` (``N`` atoms) or ``geometric`` (``P0(j) = (1-q) q^(j-1)``)."""

    kind: str
    N: int | None = None
    q: float | None = None

    def __post_init__(self):
        if self.kind == "uniform":
            if not (self.N and self.N >= 1):
                raise DomainError("uniform truth needs N >= 1")
        elif self.kind == "geometric":
            if self.q is None or not 0 < self.q < 1:
                raise DomainError("geometric truth needs q in (0, 1)")
        elif self.kind != "diffuse":
            raise DomainError(f"unknown regime {self.kind!r}")

    @classmethod
    def diffuse(cls) -> "TruthRegime":
        return cls("diffuse")

    @classmethod
    def uniform(cls, N: int) -> "TruthRegime":
        return cls("uniform", N=int(N))

    @classmethod
    def geometric(cls, q: float) -> "TruthRegime":
        return cls("geometric", q=float(q))

    @classmethod
    def parse(cls, text: str) -> "TruthRegime":
        """``diffuse``, ``uniform:5`` or ``geometric:0.3``."""
        name, _, arg = text.partition(":")
        name = name.strip().lower()
        try:
            if name == "diffuse":
                return cls.diffuse()
            if name in ("uniform", "discrete-uniform"):
                return cls.uniform(int(arg))
            if name in ("geometric", "discrete-geometric"):
                return cls.geometric(float(arg))
        except ValueError as exc:
            raise DomainError(f"malformed regime {text!r}") from exc
        raise DomainError(f"unknown regime {text!r}")

    def sample_kappa(self, n_max: int, rng: np.random.Generator) -> np.ndarray:
        """``kappa_n`` for ``n = 1..n_max`` (index 0 holds ``n = 1``)."""
        if self.kind == "diffuse":
            return np.arange(1, n_max + 1)
        if self.kind == "uniform":
            x = rng.integers(0, self.N, size=n_max)
        else:
            x = rng.geometric(1 - self.q, size=n_max)
        _, first = np.unique(x, return_index=True)
        is_new = np.zeros(n_max, dtype=int)
        is_new[first] = 1
        return np.cumsum(is_new)


@dataclass
class Trajectory:
    n: np.ndarray
    kappa: np.ndarray
    ratio: np.ndarray

    @property
    def final(self) -> float:
        return float(self.ratio[-1])

    def to_csv(self, path, alpha: float | None = None) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "ratio", "alpha_theoretical"])
            a = "" if alpha is None else repr(float(alpha))
            for n, r in zip(self.n, self.ratio):
                w.writerow([int(n), repr(float(r)), a])


def _grid(n_max: int, points: int) -> np.ndarray:
    g = np.unique(np.round(np.geomspace(1, n_max, points)).astype(int))
    return g


def alpha_trajectory(model: GibbsModel, regime: TruthRegime, n_max: int,
                     rng: np.random.Generator | None = None, points: int = 40) -> Trajectory:
    """``V_{n+1,kappa_n+1} / V_{n,kappa_n}`` on a geometric grid of ``n`` up to ``n_max``.

    Entries are ``nan`` where ``(n, kappa_n)`` has zero prior probability
    (e.g. a finite number of species exhausted by a diffuse truth).
    """
    if n_max < 10:
        raise DomainError("n_max must be at least 10")
    if regime.kind != "diffuse" and rng is None:
        raise DomainError("discrete regimes need a random generator")
    kappa_all = regime.sample_kappa(n_max, rng)
    ns = _grid(n_max, points)
    kappa = kappa_all[ns - 1]
    ratio = np.empty(ns.size)
    for idx, (n, k) in enumerate(zip(ns, kappa)):
        lo = log_V(model, int(n), int(k))
        if lo == -math.inf:
            ratio[idx] = np.nan
        elif k + 1 > model.max_clusters():
            ratio[idx] = 0.0
        else:
            ratio[idx] = math.exp(log_V(model, int(n) + 1, int(k) + 1) - lo)
    return Trajectory(ns, kappa, ratio)


def geometric_alpha(eta: float) -> float:
    """Limit for the geometric mixture of finite Dirichlet models with ``|sigma| = 1``."""
    if not 0 < eta < 1:
        raise DomainError("eta must be in (0, 1)")
    # rationalized form of (2 - eta - 2 sqrt(1-eta)) / eta, stable as eta -> 0
    r = math.sqrt(1 - eta)
    return eta / (2 - eta + 2 * r)


def alpha_theoretical(model: GibbsModel, regime: TruthRegime) -> float | None:
    """Catalogued limit of the new-value probability, or ``None`` if not known."""
    if regime.kind != "diffuse":
        return 0.0
    if isinstance(model, Dirichlet):
        return 0.0
    if isinstance(model, (PitmanYor, NGG)) and model.sigma >= 0:
        return model.sigma
    if isinstance(model, GnedinGamma):
        return 1.0
    if isinstance(model, MixedFiniteDirichlet) and model.abs_sigma == 1.0:
        kind = model.mixing.kind
        if kind == "poisson":
            return 0.0
        if kind == "geometric":
            return geometric_alpha(model.mixing.param)
        if kind == "gnedin":
            return 1.0
    return None


@dataclass
class TailReport:
    t1: bool
    t2: bool
    M_estimate: float
    m: np.ndarray
    ratio: np.ndarray

    def to_dict(self) -> dict:
        return {"T1": self.t1, "T2": self.t2, "M_estimate": self.M_estimate}


def check_tail_conditions(mixing: MixingPMF, m_max: int) -> TailReport:
    """Check ``pi(m+1)/pi(m) <= 1`` (T1) and ``pi(m+1)/pi(m) <= M/m`` (T2) for large ``m``.

    Both are judged on the upper half ``[m_max/2, m_max]`` of the witness
    sequence.  T2 is declared to hold when ``m * ratio`` does not grow by
    more than 10% across that window.
    """
    if m_max < 10:
        raise DomainError("m_max must be at least 10")
    m = np.arange(1, m_max, dtype=float)
    lp = mixing.log_pmf(np.arange(1, m_max + 1, dtype=float))
    with np.errstate(invalid="ignore"):
        ratio = np.where(np.isfinite(lp[:-1]), np.exp(lp[1:] - lp[:-1]), 0.0)
    ratio = np.nan_to_num(ratio, nan=0.0)
    tail = m >= m_max / 2
    t1 = bool(np.all(ratio[tail] <= 1.0 + 1e-12))
    mr = m * ratio
    first, last = mr[tail][0], mr[tail][-1]
    t2 = bool(last <= 1.1 * first) if first > 0 else bool(last == 0)
    return TailReport(t1, t2, float(mr[tail].max()), m.astype(int), ratio)
