"""Prior law of the number of clusters, elicitation and the sigma-diversity limit.

Under a Gibbs-type prior the number of blocks ``K_n`` has pmf

    P(K_n = k) = V_{n,k} C(n, k; sigma) / sigma^k,

which for the Dirichlet process becomes ``theta^k |s(n,k)| / (theta)_n``.
For ``sigma in (0,1)`` the count grows like ``n^sigma`` and, given a sample
with ``k`` distinct values out of ``n``, the number of new values in ``m``
further draws behaves like ``m^sigma Z_{n,k}`` with

    Z_{n,k} = B_{k + theta/sigma, n/sigma - k} * U_{(theta+n)/sigma}

a product of independent beta and polynomially tilted stable factors.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .combinatorics import log_stirling1_table, scaled_gfc_table
from .errors import DomainError, NoSolutionError
from .models import NGG, Dirichlet, GibbsModel, Partition, PitmanYor, log_V_row

__all__ = [
    "KnDistribution",
    "prior_Kn_pmf",
    "expected_Kn",
    "elicit",
    "cn_rate",
    "DiversityLimitLaw",
    "sample_tilted_stable",
    "sample_Znk",
    "asymptotic_credible_interval_Km",
    "exact_mean_Km",
]


@dataclass
class KnDistribution:
    n: int
    pmf: np.ndarray
    model: GibbsModel

    @property
    def support(self) -> np.ndarray:
        return np.arange(1, self.n + 1)

    def mean(self) -> float:
        return float(np.dot(self.support, self.pmf))

    def var(self) -> float:
        mu = self.mean()
        return float(np.dot((self.support - mu) ** 2, self.pmf))

    def mode(self) -> int:
        return int(np.argmax(self.pmf)) + 1

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "probability"])
            for k, p in zip(self.support, self.pmf):
                w.writerow([int(k), repr(float(p))])


def prior_Kn_pmf(model: GibbsModel, n: int) -> KnDistribution:
    """Prior pmf of the number of clusters among ``n`` observations."""
    if n < 1:
        raise DomainError("n must be positive")
    lv = log_V_row(model, n)
    if isinstance(model, Dirichlet):
        log_c = log_stirling1_table(n)[n, 1:]
    else:
        # scaled coefficients stay positive for sigma < 0 as well
        _, logabs = scaled_gfc_table(n, model.sigma, 0.0)
        log_c = logabs[n, 1:]
    with np.errstate(invalid="ignore"):
        logp = lv + log_c
    pmf = np.where(np.isfinite(logp), np.exp(logp), 0.0)
    return KnDistribution(n, pmf, model)


def expected_Kn(model: GibbsModel, n: int) -> float:
    return prior_Kn_pmf(model, n).mean()


_FAMILIES = {"dp": "dirichlet", "dirichlet": "dirichlet", "py": "pitman_yor",
             "pitman_yor": "pitman_yor", "ngg": "ngg"}


def elicit(family: str, sigma: float, n: int, target_mean: float,
           rtol: float = 1e-4) -> GibbsModel:
    """Solve ``E(K_n) = target_mean`` for theta (Dirichlet, Pitman-Yor) or beta (NGG).

    The expected number of clusters is increasing in the free parameter; the
    search works on a log scale and brackets the root before bisecting.
    """
    fam = _FAMILIES.get(str(family).lower())
    if fam is None:
        raise DomainError(f"elicitation is available for dp, py and ngg, not {family!r}")
    if not 1 < target_mean < n:
        raise DomainError("target mean must lie strictly between 1 and n")

    if fam == "dirichlet":
        def build(x):
            return Dirichlet(math.exp(x))
    elif fam == "pitman_yor":
        if not 0 <= sigma < 1:
            raise DomainError("Pitman-Yor elicitation needs sigma in [0, 1)")
        if sigma == 0:
            def build(x):
                return Dirichlet(math.exp(x))
        else:
            def build(x):
                return PitmanYor(sigma, math.exp(x) - sigma)
    else:
        if not 0 < sigma < 1:
            raise DomainError("NGG elicitation needs sigma in (0, 1)")

        def build(x):
            return NGG(sigma, math.exp(x))

    def f(x):
        return expected_Kn(build(x), n) - target_mean

    lo, hi = -1.0, 1.0
    f_lo, f_hi = f(lo), f(hi)
    while f_lo > 0:
        if lo < -60:
            raise NoSolutionError(f"E(K_{n}) cannot be as small as {target_mean} at sigma={sigma}")
        hi, f_hi = lo, f_lo
        lo -= 2 * abs(lo)
        f_lo = f(lo)
    while f_hi < 0:
        if hi > 60:
            raise NoSolutionError(f"E(K_{n}) cannot be as large as {target_mean} at sigma={sigma}")
        lo, f_lo = hi, f_hi
        hi += 2 * abs(hi)
        f_hi = f(hi)
    x = brentq(f, lo, hi, xtol=1e-12, rtol=1e-12)
    model = build(x)
    if abs(expected_Kn(model, n) - target_mean) > rtol * target_mean:
        raise NoSolutionError("root finder stopped short of the requested accuracy")
    return model


def cn_rate(sigma: float, n: int) -> float:
    """Scaling of ``K_n``: 1 for sigma < 0, log n for sigma = 0, n^sigma otherwise."""
    if n < 1:
        raise DomainError("n must be positive")
    if sigma < 0:
        return 1.0
    if sigma == 0:
        return math.log(n)
    return float(n) ** sigma


# --------------------------------------------------------------------------
# limit law of the number of new clusters


@dataclass(frozen=True)
class DiversityLimitLaw:
    sigma: float
    theta: float
    n: int
    k: int

    def __post_init__(self):
        if not 0 < self.sigma < 1:
            raise DomainError("the limit law needs sigma in (0, 1)")
        if not (self.k + self.theta / self.sigma > 0 and self.n / self.sigma - self.k > 0):
            raise DomainError("beta factor needs k + theta/sigma > 0 and n/sigma - k > 0")

    @classmethod
    def from_model(cls, model: PitmanYor, p: Partition) -> "DiversityLimitLaw":
        return cls(model.sigma, model.theta, p.n, p.k)

    def mean(self) -> float:
        s, t, n, k = self.sigma, self.theta, self.n, self.k
        return (k + t / s) * math.exp(math.lgamma(t + n) - math.lgamma(t + n + s))


def _log_zolotarev(u, sigma):
    """``log A(u) - log A(0)`` for Kanter's representation of the positive stable law."""
    s = sigma
    out = (np.log(np.sin(s * u) / (s * np.sin(u))) / (1 - s)
           + np.log(np.sin((1 - s) * u) / ((1 - s) * u))
           - np.log(np.sin(s * u) / (s * u)))
    return out


def sample_tilted_stable(sigma: float, tilt: float, size: int,
                         rng: np.random.Generator) -> np.ndarray:
    """Draw ``T`` with density proportional to ``t^(-tilt) f_sigma(t)``.

    ``f_sigma`` is the positive stable density with Laplace transform
    ``exp(-s^sigma)``.  Writing ``X = T^(-sigma/(1-sigma))`` and tilting
    Kanter's representation gives ``X | V ~ Gamma(c+1) / A(V)`` with
    ``c = tilt (1-sigma)/sigma`` and ``V`` on ``(0, pi)`` with density
    proportional to ``A(v)^(-c)``.  Since ``log A`` is even with second
    derivative at least ``sigma``, ``V`` is drawn exactly by rejection from a
    truncated half-normal; the acceptance rate tends to one as ``c`` grows.
    """
    if not 0 < sigma < 1:
        raise DomainError("sigma must be in (0, 1)")
    if tilt < 0:
        raise DomainError("tilt must be non-negative")
    c = tilt * (1 - sigma) / sigma
    v = np.empty(size)
    todo = np.arange(size)
    scale = 1.0 / math.sqrt(c * sigma) if c > 0 else math.inf
    while todo.size:
        if math.isinf(scale):
            prop = rng.uniform(0.0, math.pi, todo.size)
            log_acc = np.zeros(todo.size)
        else:
            prop = np.abs(rng.standard_normal(todo.size)) * scale
            inside = (prop > 0) & (prop < math.pi)
            log_acc = np.full(todo.size, -np.inf)
            pi_ = prop[inside]
            log_acc[inside] = -c * (_log_zolotarev(pi_, sigma) - 0.5 * sigma * pi_ ** 2)
        ok = np.log(rng.random(todo.size)) < log_acc
        v[todo[ok]] = prop[ok]
        todo = todo[~ok]
    log_a0 = (math.log(sigma) * sigma / (1 - sigma)) + math.log(1 - sigma)
    log_a = _log_zolotarev(v, sigma) + log_a0
    x = np.exp(np.log(rng.gamma(c + 1.0, size=size)) - log_a)
    return x ** (-(1 - sigma) / sigma)


def sample_Znk(law: DiversityLimitLaw, rng: np.random.Generator, draws: int) -> np.ndarray:
    """Draws of ``Z_{n,k} = B_{k+theta/sigma, n/sigma-k} * U_{(theta+n)/sigma}``.

    ``U_q`` has density proportional to ``u^(q-1-1/sigma) f_sigma(u^(-1/sigma))``,
    i.e. ``U_q = T^(-sigma)`` with ``T`` stable tilted by ``t^(-(theta+n))``.
    """
    if draws < 1:
        raise DomainError("draws must be positive")
    s, t, n, k = law.sigma, law.theta, law.n, law.k
    b = rng.beta(k + t / s, n / s - k, size=draws)
    u = sample_tilted_stable(s, t + n, draws, rng) ** (-s)
    return b * u


def asymptotic_credible_interval_Km(model: PitmanYor, p: Partition, m: int, level: float,
                                    rng: np.random.Generator, draws: int = 100_000):
    """Interval for the number of new species in ``m`` draws from ``c_m Z_{n,k}``.

    ``c_m`` is asymptotic to ``m^sigma`` and chosen so that ``c_m E(Z_{n,k})``
    equals the exact posterior mean; with plain ``m^sigma`` the interval is
    visibly biased upwards unless ``m`` is many orders above ``n``.
    """
    if not isinstance(model, PitmanYor) or not 0 < model.sigma < 1:
        raise DomainError("asymptotic intervals need a Pitman-Yor model with sigma in (0, 1)")
    if not 0 <= level < 1:
        raise DomainError("level must be in [0, 1)")
    if m < 10 * p.n:
        warnings.warn("asymptotic interval used with m < 10 n", RuntimeWarning, stacklevel=2)
    law = DiversityLimitLaw.from_model(model, p)
    z = sample_Znk(law, rng, draws)
    lo, hi = np.quantile(z, [(1 - level) / 2, (1 + level) / 2])
    scale = exact_mean_Km(model, p, m) / law.mean()
    return float(scale * lo), float(scale * hi)


def exact_mean_Km(model: PitmanYor, p: Partition, m: int) -> float:
    """``(k + theta/sigma) ((theta+n+sigma)_m / (theta+n)_m - 1)``."""
    s, t, n, k = model.sigma, model.theta, p.n, p.k
    lr = math.lgamma(t + n + s + m) - math.lgamma(t + n + s) - math.lgamma(t + n + m) \
        + math.lgamma(t + n)
    return (k + t / s) * math.expm1(lr)

