"""Species sampling estimators under Gibbs-type priors.

Given a basic sample of size ``n`` with ``k`` distinct species and frequency
counts ``M_i`` (the number of species seen exactly ``i`` times), the
functions below predict what an additional sample of size ``m`` will reveal:
the number of new species, how many species will have a given frequency,
and the probability that draw ``n+m+1`` hits a species seen ``i`` times.

Every Bayesian estimator is a sum of terms

    V_{n+m, k+j} / V_{n,k} * C(m', j; sigma, gamma) / sigma^j

whose scaled coefficients come from the positive recurrence in
:mod:`gibbsprior.combinatorics`.  Pitman-Yor closed forms are provided as
fast paths.  The frequentist Turing and Good-Toulmin estimators are included
for comparison.
"""

from __future__ import annotations

import csv
import io
import math
import os
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, gammaln

from .clustering import asymptotic_credible_interval_Km
from .combinatorics import iter_log_scaled_gfc_rows, log_rising, log_scaled_gfc_row
from .errors import ConvergenceError, DataError, DomainError
from .models import NGG, Dirichlet, GibbsModel, Partition, PitmanYor, log_V, log_V_row

__all__ = [
    "SpeciesSample",
    "SpeciesEstimateReport",
    "load_frequency_counts",
    "load_raw_labels",
    "fixture_path",
    "pmf_Km",
    "pmf_Km_pitman_yor",
    "estimate_Km",
    "estimate_new_with_freq",
    "estimate_old_with_freq",
    "rare_variety",
    "discovery_prob_current",
    "discovery_prob_future",
    "discovery_curve",
    "turing_estimator",
    "sample_coverage",
    "good_toulmin",
    "good_toulmin_curve",
    "EmpiricalBayesFit",
    "empirical_bayes_fit",
    "write_curve_csv",
]

EXACT_INTERVAL_MAX_M = 5000


# --------------------------------------------------------------------------
# data


@dataclass(frozen=True)
class SpeciesSample:
    """Frequency-count summary of a basic sample."""

    freq_counts: dict

    def __init__(self, freq_counts: dict):
        counts = {}
        for i, mi in freq_counts.items():
            i, mi = int(i), int(mi)
            if i < 1:
                raise DataError(f"frequency {i} must be positive")
            if mi < 0:
                raise DataError(f"count for frequency {i} must be non-negative")
            if mi:
                counts[i] = counts.get(i, 0) + mi
        if not counts:
            raise DataError("sample is empty")
        object.__setattr__(self, "freq_counts", dict(sorted(counts.items())))

    @property
    def n(self) -> int:
        return sum(i * mi for i, mi in self.freq_counts.items())

    @property
    def k(self) -> int:
        return sum(self.freq_counts.values())

    def M(self, i: int) -> int:
        return self.freq_counts.get(int(i), 0)

    @classmethod
    def from_partition(cls, p: Partition) -> "SpeciesSample":
        return cls(p.freq_counts)

    def to_partition(self) -> Partition:
        return Partition.from_freq_counts(self.freq_counts)


def fixture_path(name: str) -> Path:
    """Path of a bundled data file; ``GIBBS_DATA_DIR`` overrides the location."""
    override = os.environ.get("GIBBS_DATA_DIR")
    if override:
        return Path(override) / name
    return Path(str(resources.files("gibbsprior") / "data" / name))


def _read_text(path) -> str:
    path = Path(path)
    if not path.exists() and not path.is_absolute() and path.parent == Path("."):
        alt = fixture_path(path.name)
        if alt.exists():
            path = alt
    try:
        return path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from exc


def load_frequency_counts(path, expected_n: int | None = None) -> SpeciesSample:
    """Read a ``frequency,count`` CSV.  Bare file names fall back to the bundled fixtures."""
    text = _read_text(path)
    rows = [r for r in csv.reader(io.StringIO(text))]
    body = [(lineno, r) for lineno, r in enumerate(rows, start=1)
            if r and not r[0].lstrip().startswith("#")]
    if not body:
        raise DataError("empty file", line=1)
    lineno, header = body[0]
    if [h.strip().lower() for h in header] != ["frequency", "count"]:
        raise DataError("header must be 'frequency,count'", line=lineno)
    counts = {}
    for lineno, r in body[1:]:
        if len(r) != 2:
            raise DataError("expected two columns", line=lineno)
        try:
            i, mi = int(r[0]), int(r[1])
        except ValueError:
            raise DataError(f"non-integer entry {r!r}", line=lineno) from None
        if i < 1 or mi < 0:
            raise DataError("frequency must be positive and count non-negative", line=lineno)
        if i in counts:
            raise DataError(f"frequency {i} listed twice", line=lineno)
        counts[i] = mi
    if not any(counts.values()):
        raise DataError("no species in file")
    s = SpeciesSample(counts)
    if expected_n is not None and s.n != expected_n:
        raise DataError(f"sum of i*M_i is {s.n}, expected {expected_n}")
    return s


def load_raw_labels(path) -> SpeciesSample:
    """Read one species label per line (blank lines ignored)."""
    labels = [ln.strip() for ln in _read_text(path).splitlines() if ln.strip()]
    if not labels:
        raise DataError("empty file", line=1)
    return SpeciesSample.from_partition(Partition.from_labels(labels))


# --------------------------------------------------------------------------
# reports


@dataclass
class SpeciesEstimateReport:
    estimate: float
    credible_interval: tuple | None
    method: str
    model: GibbsModel
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"estimate": self.estimate, "interval": None, "method": self.method,
             "model": self.model.to_dict(), "diagnostics": self.diagnostics}
        if self.credible_interval is not None:
            lo, hi, level = self.credible_interval
            d["interval"] = {"lo": lo, "hi": hi, "level": level}
        return d


def write_curve_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([x if isinstance(x, (int, np.integer, str)) else repr(float(x)) for x in r])


# --------------------------------------------------------------------------
# overall species variety


def _log_binom(a, b):
    return gammaln(a + 1) - gammaln(b + 1) - gammaln(a - b + 1)


def _weighted_sum(model, s, N, k_offset, log_row, extra=0.0):
    """``sum_j exp(log V_{N, k+k_offset+j} - log V_{n,k} + log_row[j])``."""
    ks = s.k + k_offset + np.arange(log_row.size)
    keep = ks <= min(N, model.max_clusters())
    if not keep.any():
        return 0.0
    lv = log_V_row(model, N, ks[keep]) - log_V(model, s.n, s.k)
    terms = lv + log_row[keep] + extra
    return float(np.exp(np.logaddexp.reduce(terms)))


def pmf_Km(model: GibbsModel, s: SpeciesSample, m: int) -> np.ndarray:
    """Posterior pmf of the number of new species ``K_m`` over ``j = 0..m``."""
    if m < 0:
        raise DomainError("m must be non-negative")
    if m == 0:
        return np.ones(1)
    n, k = s.n, s.k
    row = log_scaled_gfc_row(m, model.sigma, -n + k * model.sigma)
    ks = k + np.arange(m + 1)
    out = np.zeros(m + 1)
    keep = ks <= min(n + m, model.max_clusters())
    logp = log_V_row(model, n + m, ks[keep]) - log_V(model, n, k) + row[keep]
    out[keep] = np.exp(logp)
    return out


def pmf_Km_pitman_yor(model: PitmanYor, s: SpeciesSample, m: int) -> np.ndarray:
    """Pitman-Yor closed form ``(theta/sigma + k)_j / (theta+n)_m * C(m, j; sigma, -n+k sigma)``."""
    if not isinstance(model, PitmanYor) or not 0 < model.sigma < 1:
        raise DomainError("closed form needs a Pitman-Yor model with sigma in (0, 1)")
    sg, t, n, k = model.sigma, model.theta, s.n, s.k
    j = np.arange(m + 1)
    row = log_scaled_gfc_row(m, sg, -n + k * sg)
    logp = (log_rising(t / sg + k, j) + j * math.log(sg) - log_rising(t + n, m) + row)
    return np.exp(logp)


def _pmf_interval(pmf, level):
    cdf = np.cumsum(pmf)
    lo = int(np.searchsorted(cdf, (1 - level) / 2 - 1e-12))
    hi = int(np.searchsorted(cdf, (1 + level) / 2 - 1e-12))
    return min(lo, pmf.size - 1), min(hi, pmf.size - 1)


def estimate_Km(model: GibbsModel, s: SpeciesSample, m: int, level: float | None = 0.95,
                rng: np.random.Generator | None = None) -> SpeciesEstimateReport:
    """Posterior mean of the number of new species in ``m`` further draws."""
    if m < 0:
        raise DomainError("m must be non-negative")
    if m == 0:
        return SpeciesEstimateReport(0.0, (0.0, 0.0, level) if level is not None else None,
                                     "closed_form", model)
    py = isinstance(model, PitmanYor) and 0 < model.sigma < 1
    if py:
        sg, t, n, k = model.sigma, model.theta, s.n, s.k
        est = (k + t / sg) * math.expm1(float(log_rising(t + n + sg, m) - log_rising(t + n, m)))
    interval = None
    method = "closed_form" if py else "exact_pmf"
    if m <= EXACT_INTERVAL_MAX_M or not py:
        pmf = pmf_Km(model, s, m)
        mean = float(np.dot(np.arange(m + 1), pmf))
        if not py:
            est = mean
        if level is not None:
            lo, hi = _pmf_interval(pmf, level)
            interval = (float(lo), float(hi), level)
            method = "exact_pmf"
        diagnostics = {"pmf_mass": float(pmf.sum())}
    else:
        diagnostics = {}
        if level is not None:
            rng = rng if rng is not None else np.random.default_rng(0)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                lo, hi = asymptotic_credible_interval_Km(model, s.to_partition(), m, level, rng)
            interval = (lo, hi, level)
            method = "asymptotic"
    return SpeciesEstimateReport(float(est), interval, method, model, diagnostics)


# --------------------------------------------------------------------------
# rare species variety


def _py(model):
    return isinstance(model, PitmanYor) and model.sigma >= 0 or isinstance(model, Dirichlet)


def _py_params(model):
    if isinstance(model, Dirichlet):
        return 0.0, model.theta
    return model.sigma, model.theta


def estimate_new_with_freq(model: GibbsModel, s: SpeciesSample, m: int, i: int,
                           closed_form: bool = True) -> float:
    """Expected number of new species seen exactly ``i`` times in the additional sample."""
    if not 1 <= i <= m:
        raise DomainError("need 1 <= i <= m")
    n, k = s.n, s.k
    sg = model.sigma
    log_pre = float(_log_binom(m, i) + log_rising(1 - sg, i - 1))
    if closed_form and _py(model):
        sg, t = _py_params(model)
        return math.exp(log_pre + math.log(t + k * sg)
                        + float(log_rising(t + n + sg, m - i) - log_rising(t + n, m)))
    row = log_scaled_gfc_row(m - i, sg, -n + k * sg)
    return _weighted_sum(model, s, n + m, 1, row, log_pre)


def estimate_old_with_freq(model: GibbsModel, s: SpeciesSample, m: int, i: int,
                           closed_form: bool = True) -> float:
    """Expected number of already observed species with frequency ``i`` in the enlarged sample."""
    if not 1 <= i <= s.n + m:
        raise DomainError("need 1 <= i <= n + m")
    n, k = s.n, s.k
    sg = model.sigma
    total = 0.0
    for t_ in range(max(1, i - m), i + 1):
        mt = s.M(t_)
        if mt == 0:
            continue
        d = i - t_
        log_pre = float(_log_binom(m, d) + math.log(mt) + log_rising(t_ - sg, d))
        if closed_form and _py(model):
            sg_, th = _py_params(model)
            total += math.exp(log_pre + float(log_rising(th + n - t_ + sg_, m - d)
                                              - log_rising(th + n, m)))
        else:
            row = log_scaled_gfc_row(m - d, sg, -n + t_ + (k - 1) * sg)
            total += _weighted_sum(model, s, n + m, 0, row, log_pre)
    return total


def rare_variety(model: GibbsModel, s: SpeciesSample, m: int, tau: int,
                 closed_form: bool = True) -> dict:
    """``N(tau)``, ``O(tau)`` and their sum ``M(tau)``: species with frequency at most ``tau``."""
    if tau < 1:
        raise DomainError("tau must be positive")
    new = sum(estimate_new_with_freq(model, s, m, i, closed_form) for i in range(1, min(tau, m) + 1))
    old = sum(estimate_old_with_freq(model, s, m, i, closed_form) for i in range(1, tau + 1))
    return {"new": new, "old": old, "total": new + old}


# --------------------------------------------------------------------------
# discovery probabilities


def discovery_prob_current(model: GibbsModel, s: SpeciesSample, i: int) -> float:
    """Probability that draw ``n+1`` is a species seen ``i`` times (``i = 0``: new)."""
    n, k = s.n, s.k
    if not 0 <= i <= n:
        raise DomainError("need 0 <= i <= n")
    base = log_V(model, n, k)
    if i == 0:
        if k + 1 > model.max_clusters():
            return 0.0
        return math.exp(log_V(model, n + 1, k + 1) - base)
    if s.M(i) == 0:
        return 0.0
    return math.exp(log_V(model, n + 1, k) - base) * (i - model.sigma) * s.M(i)


def discovery_prob_future(model: GibbsModel, s: SpeciesSample, m: int, i: int,
                          closed_form: bool = True) -> float:
    """Probability that draw ``n+m+1`` is a species seen ``i`` times among the first ``n+m``."""
    n, k = s.n, s.k
    if m < 0 or not 0 <= i <= n + m:
        raise DomainError("need m >= 0 and 0 <= i <= n + m")
    if m == 0:
        return discovery_prob_current(model, s, i)
    sg = model.sigma
    if closed_form and _py(model):
        sg_, th = _py_params(model)
        den = float(log_rising(th + n, m + 1))
        total = 0.0
        for l in range(max(1, i - m), i + 1):
            if s.M(l):
                total += math.exp(math.log(s.M(l)) + float(log_rising(l - sg_, i + 1 - l))
                                  + float(_log_binom(m, i - l))
                                  + float(log_rising(th + n - l + sg_, m - i + l)) - den)
        if i <= m:
            total += math.exp(float(log_rising(1 - sg_, i)) + float(_log_binom(m, i))
                              + math.log(th + k * sg_)
                              + float(log_rising(th + n + sg_, m - i)) - den)
        return total
    total = 0.0
    for l in range(max(1, i - m), i + 1):
        if s.M(l) == 0:
            continue
        log_pre = float(math.log(s.M(l)) + log_rising(l - sg, i + 1 - l) + _log_binom(m, i - l))
        row = log_scaled_gfc_row(m - i + l, sg, -n + l + (k - 1) * sg)
        total += _weighted_sum(model, s, n + m + 1, 0, row, log_pre)
    if i <= m:
        # sigma (1-sigma)_i binom(m,i) Q(1,1,0): the leading sigma cancels the 1/sigma shift
        log_pre = float(log_rising(1 - sg, i) + _log_binom(m, i))
        row = log_scaled_gfc_row(m - i, sg, -n + k * sg)
        total += _weighted_sum(model, s, n + m + 1, 1, row, log_pre)
    return total


def discovery_curve(model: GibbsModel, s: SpeciesSample, m_values) -> np.ndarray:
    """Probability of a new species at draw ``n+m+1`` for each ``m`` in ``m_values``."""
    m_values = np.asarray(m_values, dtype=int)
    if m_values.size == 0:
        return np.zeros(0)
    if m_values.min() < 0:
        raise DomainError("m must be non-negative")
    n, k = s.n, s.k
    if _py(model):
        sg, th = _py_params(model)
        return np.exp(math.log(th + k * sg) - math.log(th + n)
                      + log_rising(th + n + sg, m_values) - log_rising(th + n + 1, m_values))
    wanted = {int(m): idx for idx, m in enumerate(m_values)}
    out = np.empty(m_values.size, dtype=float)
    for m, row in enumerate(iter_log_scaled_gfc_rows(int(m_values.max()), model.sigma,
                                                     -n + k * model.sigma)):
        if m in wanted:
            val = _weighted_sum(model, s, n + m + 1, 1, row)
            for idx in np.flatnonzero(m_values == m):
                out[idx] = val
    return out


# --------------------------------------------------------------------------
# frequentist baselines


def turing_estimator(s: SpeciesSample, i: int) -> float:
    """``(i+1) M_{i+1} / n``."""
    if not 0 <= i < s.n:
        raise DomainError("need 0 <= i < n")
    return (i + 1) * s.M(i + 1) / s.n


def sample_coverage(s: SpeciesSample) -> float:
    return 1.0 - turing_estimator(s, 0)


def good_toulmin(s: SpeciesSample, m: int):
    """Good-Toulmin estimates ``(U_{n+m,0}, K_m)`` and whether either is inadmissible.

    Values are returned unclipped; the flag is set when the discovery
    probability leaves ``[0, 1]`` or the species count is negative.
    """
    if m < 1:
        raise DomainError("m must be positive")
    lam = m / s.n
    i = np.array(list(s.freq_counts.keys()), dtype=float)
    mi = np.array(list(s.freq_counts.values()), dtype=float)
    sign = np.where(i % 2 == 1, 1.0, -1.0)  # (-1)^(i-1)
    u = float(np.sum(sign * lam ** (i - 1) * i * mi) / s.n)
    kk = float(np.sum(sign * lam ** i * mi))
    flag = not (0.0 <= u <= 1.0) or kk < 0
    return u, kk, flag


def good_toulmin_curve(s: SpeciesSample, m_values):
    res = [good_toulmin(s, int(m)) for m in m_values]
    u = np.array([r[0] for r in res])
    kk = np.array([r[1] for r in res])
    flag = np.array([r[2] for r in res])
    return u, kk, flag


# --------------------------------------------------------------------------
# empirical Bayes


@dataclass
class EmpiricalBayesFit:
    model: GibbsModel
    log_likelihood: float
    degenerate: bool = False
    n_starts: int = 0

    def to_dict(self) -> dict:
        return {"model": self.model.to_dict(), "log_likelihood": self.log_likelihood,
                "degenerate": self.degenerate}


def _eppf_loglik(model, s):
    lv = log_V(model, s.n, s.k)
    sg = model.sigma
    blocks = sum(mi * float(log_rising(1 - sg, i - 1)) for i, mi in s.freq_counts.items())
    return lv + blocks


def empirical_bayes_fit(family: str, s: SpeciesSample, starts=None,
                        max_iter: int = 2000) -> EmpiricalBayesFit:
    """Maximize the EPPF of the observed partition over the family's parameters.

    ``sigma`` is optimized on the logit scale and ``theta`` (or ``beta``) on
    the log scale; for Pitman-Yor ``theta + sigma`` is the log-scaled
    quantity so the constraint ``theta > -sigma`` holds automatically.
    """
    fam = str(family).lower()
    if s.k == 1:
        # no heterogeneity information: the likelihood increases towards the boundary
        if fam in ("dp", "dirichlet"):
            model = Dirichlet(1e-8)
        elif fam in ("py", "pitman_yor"):
            model = PitmanYor(0.0, 1e-8)
        else:
            model = NGG(1e-6, 1e-8)
        return EmpiricalBayesFit(model, _eppf_loglik(model, s), degenerate=True)

    if fam in ("dp", "dirichlet"):
        def build(x):
            return Dirichlet(math.exp(x[0]))
        starts = starts or [[0.0], [math.log(s.k)], [math.log(s.n)]]
    elif fam in ("py", "pitman_yor"):
        def build(x):
            sg = float(expit(x[0]))
            return PitmanYor(sg, math.exp(x[1]) - sg)
        starts = starts or [[a, b] for a in (-1.0, 0.0, 1.0) for b in (0.0, math.log(s.k))]
    elif fam == "ngg":
        def build(x):
            return NGG(float(expit(x[0])), math.exp(x[1]))
        starts = starts or [[a, b] for a in (-1.0, 0.0, 1.0) for b in (0.0, math.log(s.k))]
    else:
        raise DomainError(f"empirical Bayes is available for dp, py and ngg, not {family!r}")

    def nll(x):
        if np.any(np.abs(x) > 50):
            return np.inf
        try:
            val = _eppf_loglik(build(x), s)
        except (DomainError, FloatingPointError, OverflowError):
            return np.inf
        return -val if np.isfinite(val) else np.inf

    best = None
    any_converged = False
    for x0 in starts:
        res = minimize(nll, np.asarray(x0, dtype=float), method="Nelder-Mead",
                       options={"maxiter": max_iter, "xatol": 1e-8, "fatol": 1e-10})
        any_converged |= bool(res.success)
        if best is None or res.fun < best.fun:
            best = res
    if not any_converged or not np.isfinite(best.fun):
        raise ConvergenceError("empirical Bayes search did not converge")
    model = build(best.x)
    degenerate = model.sigma < 1e-6 or model.sigma > 1 - 1e-6
    return EmpiricalBayesFit(model, float(-best.fun), degenerate, len(starts))
