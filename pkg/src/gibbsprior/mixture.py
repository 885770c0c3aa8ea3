"""Gaussian mixture models driven by a Gibbs-type prior.

The model is

    y_i | m_i, v_i ~ N(m_i, v_i)                (v is a variance)
    (m_i, v_i) | p ~ p,    p ~ Gibbs-type prior with base measure
    P*(dm, dv) = N(m | mu, tau / v) Ga(v | 2, 1)
    mu ~ N(0, 0.001),   1/tau ~ Ga(1, 100)      (second Ga argument is a rate)

Posterior sampling is a marginal sampler: allocations are updated one at a
time with Neal's auxiliary-component scheme, where an existing cluster ``j``
gets weight ``(n_j - sigma) V_{n,k-}`` and each of the ``aux`` fresh draws from
the base gets ``V_{n,k-+1} / aux`` (``k-`` is the number of clusters without
observation ``i``).  An acceleration step then refreshes every cluster's
``(m_j, v_j)``: ``m_j`` from its normal full conditional and ``v_j`` by
slice sampling on ``log v_j``.  With ``v_role="precision"`` the kernel is
``N(m, 1/v)`` and ``v_j`` is drawn from its gamma full conditional.  Finally ``mu`` and ``1/tau`` get their
conjugate updates.

The chain runs in a numba kernel, seeded explicitly so identical
configurations give identical traces.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numba
import numpy as np
from scipy.special import roots_genlaguerre

from .errors import DomainError
from .models import GibbsModel, log_V_row

__all__ = [
    "MixtureConfig",
    "MixtureTrace",
    "simulate_toy_data",
    "fit",
    "posterior_Kn_pmf",
    "density_estimate",
    "base_marginal_density",
    "cluster_marginal_loglik",
]


@dataclass(frozen=True)
class MixtureConfig:
    model: GibbsModel
    mu0: float = 0.0
    mu_var: float = 0.001
    tau_shape: float = 1.0
    tau_rate: float = 100.0
    v_shape: float = 2.0
    v_rate: float = 1.0
    aux_components: int = 3
    iters: int = 100_000  # sweeps after burn-in
    burnin: int = 5_000
    thin: int = 1
    seed: int = 0
    snapshot_every: int = 10
    flat_likelihood: bool = False
    fixed_hyper: tuple | None = None  # (mu, tau) held fixed when given
    v_role: str = "variance"  # or "precision": kernel N(m, 1/v)

    def __post_init__(self):
        if self.iters < 1 or self.burnin < 0:
            raise DomainError("need iters >= 1 and burnin >= 0")
        if self.aux_components < 1:
            raise DomainError("aux_components must be at least 1")
        if self.thin < 1 or self.snapshot_every < 1:
            raise DomainError("thin and snapshot_every must be positive")
        if self.mu_var <= 0 or self.tau_shape <= 0 or self.tau_rate <= 0:
            raise DomainError("hyperprior parameters must be positive")
        if self.v_shape <= 0 or self.v_rate <= 0:
            raise DomainError("v prior parameters must be positive")
        if self.v_role not in ("variance", "precision"):
            raise DomainError("v_role must be 'variance' or 'precision'")

    def with_mu_precision(self, precision: float) -> "MixtureConfig":
        """Alternative reading of the ``mu`` hyperprior: second argument as a precision."""
        return replace(self, mu_var=1.0 / precision)

    @classmethod
    def escobar_west(cls, model: GibbsModel, **kw) -> "MixtureConfig":
        """Conjugate reading: ``v`` is a kernel precision, ``N(0, 0.001)`` has
        precision 0.001 and ``Ga(1, 100)`` for ``1/tau`` has scale 100."""
        base = dict(v_role="precision", mu_var=1000.0, tau_rate=0.01)
        base.update(kw)
        return cls(model, **base)


@dataclass
class MixtureTrace:
    """Kept draws.  Snapshots of cluster summaries are stored every ``snapshot_every`` draws."""

    config: MixtureConfig
    k: np.ndarray
    mu: np.ndarray
    tau: np.ndarray
    snap_offsets: np.ndarray
    snap_sizes: np.ndarray
    snap_m: np.ndarray
    snap_v: np.ndarray
    snap_mu: np.ndarray
    snap_tau: np.ndarray
    n: int
    extra: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.k.size

    def snapshots(self):
        for s in range(self.snap_offsets.size - 1):
            a, b = self.snap_offsets[s], self.snap_offsets[s + 1]
            yield (self.snap_sizes[a:b], self.snap_m[a:b], self.snap_v[a:b],
                   self.snap_mu[s], self.snap_tau[s])

    def to_csv(self, path) -> None:
        burn = self.config.burnin
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "K", "mu", "tau"])
            for idx in range(self.k.size):
                w.writerow([burn + (idx + 1) * self.config.thin, int(self.k[idx]),
                            repr(float(self.mu[idx])), repr(float(self.tau[idx]))])


def simulate_toy_data(seed: int, n: int = 50) -> np.ndarray:
    """Equal-weight mixture of N(1, 0.2) and N(10, 0.2), 0.2 being the variance."""
    rng = np.random.default_rng(seed)
    comp = rng.random(n) < 0.5
    means = np.where(comp, 1.0, 10.0)
    return means + math.sqrt(0.2) * rng.standard_normal(n)


# --------------------------------------------------------------------------
# numba kernel


@numba.njit(cache=True)
def _log_normal(y, m, v):
    return -0.5 * (math.log(2 * math.pi * v) + (y - m) ** 2 / v)


@numba.njit(cache=True)
def _log_v_conditional(u, shape, rate, m, mu, tau, nj, ss):
    # log density of u = log v given m_j and the cluster's data, Jacobian included
    v = math.exp(u)
    return ((shape + 0.5 - 0.5 * nj) * u - rate * v
            - v * (m - mu) ** 2 / (2.0 * tau) - ss / (2.0 * v))


@numba.njit(cache=True)
def _slice_log_v(u0, shape, rate, m, mu, tau, nj, ss):
    width = 1.0
    f0 = _log_v_conditional(u0, shape, rate, m, mu, tau, nj, ss)
    level = f0 + math.log(np.random.random())
    left = u0 - width * np.random.random()
    right = left + width
    steps = 0
    while _log_v_conditional(left, shape, rate, m, mu, tau, nj, ss) > level and steps < 60:
        left -= width
        steps += 1
    steps = 0
    while _log_v_conditional(right, shape, rate, m, mu, tau, nj, ss) > level and steps < 60:
        right += width
        steps += 1
    while True:
        u = left + (right - left) * np.random.random()
        if _log_v_conditional(u, shape, rate, m, mu, tau, nj, ss) > level:
            return u
        if u < u0:
            left = u
        else:
            right = u


@numba.njit(cache=True)
def _run_chain(y, lv, sigma, aux, iters, burnin, thin, snapshot_every, seed,
               mu0, mu_var, tau_shape, tau_rate, v_shape, v_rate, flat, fix_hyper,
               mu_init, tau_init, v_precision):
    np.random.seed(seed)
    n = y.size
    cap = n + aux + 1
    z = np.zeros(n, dtype=np.int64)
    counts = np.zeros(cap, dtype=np.int64)
    cm = np.zeros(cap)
    cv = np.ones(cap)
    K = 1
    counts[0] = n
    cm[0] = np.mean(y)
    cv[0] = max(np.var(y), 1e-3)
    if v_precision:
        cv[0] = 1.0 / cv[0]
    mu = mu_init
    tau = tau_init

    n_keep = (iters - burnin) // thin
    k_trace = np.zeros(n_keep, dtype=np.int64)
    mu_trace = np.zeros(n_keep)
    tau_trace = np.zeros(n_keep)
    n_snap = (n_keep + snapshot_every - 1) // snapshot_every
    snap_off = np.zeros(n_snap + 1, dtype=np.int64)
    snap_sizes = np.zeros(n_snap * n, dtype=np.int64)
    snap_m = np.zeros(n_snap * n)
    snap_v = np.zeros(n_snap * n)
    snap_mu = np.zeros(n_snap)
    snap_tau = np.zeros(n_snap)

    aux_m = np.zeros(aux)
    aux_v = np.zeros(aux)
    logw = np.zeros(cap)
    log_aux = math.log(aux)
    keep = 0
    snap = 0

    for it in range(iters):
        # allocation updates
        for i in range(n):
            c = z[i]
            counts[c] -= 1
            start = 0
            if counts[c] == 0:
                aux_m[0] = cm[c]
                aux_v[0] = cv[c]
                start = 1
                last = K - 1
                if c != last:
                    cm[c] = cm[last]
                    cv[c] = cv[last]
                    counts[c] = counts[last]
                    for t in range(n):
                        if z[t] == last:
                            z[t] = c
                counts[last] = 0
                K -= 1
            for a in range(start, aux):
                v = np.random.gamma(v_shape, 1.0 / v_rate)
                aux_v[a] = v
                aux_m[a] = mu + math.sqrt(tau / v) * np.random.standard_normal()
            yi = y[i]
            for j in range(K):
                logw[j] = math.log(counts[j] - sigma) + lv[K]
                if not flat:
                    logw[j] += _log_normal(yi, cm[j], 1.0 / cv[j] if v_precision else cv[j])
            for a in range(aux):
                logw[K + a] = lv[K + 1] - log_aux
                if not flat:
                    kv = 1.0 / aux_v[a] if v_precision else aux_v[a]
                    logw[K + a] += _log_normal(yi, aux_m[a], kv)
            top = -np.inf
            for j in range(K + aux):
                if logw[j] > top:
                    top = logw[j]
            tot = 0.0
            for j in range(K + aux):
                logw[j] = math.exp(logw[j] - top)
                tot += logw[j]
            r = np.random.random() * tot
            pick = K + aux - 1
            acc = 0.0
            for j in range(K + aux):
                acc += logw[j]
                if r < acc:
                    pick = j
                    break
            if pick < K:
                z[i] = pick
                counts[pick] += 1
            else:
                a = pick - K
                cm[K] = aux_m[a]
                cv[K] = aux_v[a]
                counts[K] = 1
                z[i] = K
                K += 1

        # acceleration: refresh cluster parameters
        for j in range(K):
            s1 = 0.0
            for t in range(n):
                if z[t] == j:
                    s1 += y[t]
            nj = counts[j]
            if flat:
                nj_eff = 0
                s1 = 0.0
            else:
                nj_eff = nj
            kprec = cv[j] if v_precision else 1.0 / cv[j]
            prec = cv[j] / tau + nj_eff * kprec
            mean = (mu * cv[j] / tau + s1 * kprec) / prec
            cm[j] = mean + np.random.standard_normal() / math.sqrt(prec)
            ss = 0.0
            if not flat:
                for t in range(n):
                    if z[t] == j:
                        ss += (y[t] - cm[j]) ** 2
            if v_precision:
                # normal-gamma conjugacy
                rate = v_rate + 0.5 * (cm[j] - mu) ** 2 / tau + 0.5 * ss
                cv[j] = np.random.gamma(v_shape + 0.5 + 0.5 * nj_eff, 1.0 / rate)
            else:
                u = _slice_log_v(math.log(cv[j]), v_shape, v_rate, cm[j], mu, tau, nj_eff, ss)
                cv[j] = math.exp(u)

        # hyperparameters
        if not fix_hyper:
            prec = 1.0 / mu_var
            num = mu0 / mu_var
            for j in range(K):
                prec += cv[j] / tau
                num += cv[j] * cm[j] / tau
            mu = num / prec + np.random.standard_normal() / math.sqrt(prec)
            b = tau_rate
            for j in range(K):
                b += 0.5 * cv[j] * (cm[j] - mu) ** 2
            omega = np.random.gamma(tau_shape + 0.5 * K, 1.0 / b)
            tau = 1.0 / omega

        if it >= burnin and (it - burnin + 1) % thin == 0 and keep < n_keep:
            k_trace[keep] = K
            mu_trace[keep] = mu
            tau_trace[keep] = tau
            if keep % snapshot_every == 0:
                off = snap_off[snap]
                for j in range(K):
                    snap_sizes[off + j] = counts[j]
                    snap_m[off + j] = cm[j]
                    snap_v[off + j] = cv[j]
                snap_off[snap + 1] = off + K
                snap_mu[snap] = mu
                snap_tau[snap] = tau
                snap += 1
            keep += 1

    used = snap_off[snap]
    return (k_trace, mu_trace, tau_trace, snap_off[: snap + 1], snap_sizes[:used],
            snap_m[:used], snap_v[:used], snap_mu[:snap], snap_tau[:snap])


def _log_v_vectors(model: GibbsModel, n: int):
    """``log V_{n,k}`` and ``log V_{n+1,k}`` padded so index ``k`` is valid up to ``n+2``."""
    lv = np.full(n + 3, -np.inf)
    lv[1:n + 1] = log_V_row(model, n)
    lv_next = np.full(n + 3, -np.inf)
    lv_next[1:n + 2] = log_V_row(model, n + 1)
    return lv, lv_next


def fit(config: MixtureConfig, data) -> MixtureTrace:
    """Run one chain and return the kept draws."""
    y = np.ascontiguousarray(np.asarray(data, dtype=float))
    if y.ndim != 1 or y.size < 1:
        raise DomainError("data must be a non-empty vector")
    if not np.all(np.isfinite(y)):
        raise DomainError("data must be finite")
    n = y.size
    lv, lv_next = _log_v_vectors(config.model, n)
    if config.fixed_hyper is not None:
        mu_init, tau_init = map(float, config.fixed_hyper)
        fix = True
    else:
        mu_init, tau_init = config.mu0, config.tau_rate / config.tau_shape
        fix = False
    out = _run_chain(y, lv, float(config.model.sigma), int(config.aux_components),
                     int(config.iters + config.burnin), int(config.burnin), int(config.thin),
                     int(config.snapshot_every), int(config.seed) % (2 ** 32),
                     float(config.mu0), float(config.mu_var), float(config.tau_shape),
                     float(config.tau_rate), float(config.v_shape), float(config.v_rate),
                     bool(config.flat_likelihood), fix, mu_init, tau_init,
                     config.v_role == "precision")
    k, mu, tau, off, sizes, sm, sv, smu, stau = out
    return MixtureTrace(config, k, mu, tau, off, sizes, sm, sv, smu, stau, n,
                        extra={"lv_next": lv_next, "lv": lv})


def posterior_Kn_pmf(trace: MixtureTrace, batches: int = 50):
    """Empirical pmf of ``K_n`` over ``k = 1..n`` with batch-means standard errors."""
    if len(trace) == 0:
        raise DomainError("empty trace")
    k = trace.k
    pmf = np.bincount(k, minlength=trace.n + 1)[1:trace.n + 1] / k.size
    nb = min(batches, k.size)
    chunks = np.array_split(k, nb)
    per = np.array([np.bincount(c, minlength=trace.n + 1)[1:trace.n + 1] / c.size for c in chunks])
    se = per.std(axis=0, ddof=1) / math.sqrt(nb) if nb > 1 else np.full(trace.n, np.nan)
    return pmf, se


_GL_NODES, _GL_WEIGHTS = roots_genlaguerre(80, 1.0)


def base_marginal_density(grid, mu: float, tau: float, v_shape: float = 2.0,
                          v_rate: float = 1.0, v_role: str = "variance") -> np.ndarray:
    """Prior predictive ``int N(y | mu, v + tau/v) Ga(v | shape, rate) dv``.

    With ``v_role="precision"`` the variance is ``(1 + tau)/v`` instead.
    """
    grid = np.asarray(grid, dtype=float)
    if v_shape == 2.0:
        x, w = _GL_NODES, _GL_WEIGHTS
    else:
        x, w = roots_genlaguerre(80, v_shape - 1.0)
    v = x / v_rate
    w = w / math.gamma(v_shape)
    var = (1.0 + tau) / v if v_role == "precision" else v + tau / v
    dens = np.exp(-0.5 * (grid[:, None] - mu) ** 2 / var) / np.sqrt(2 * math.pi * var)
    return dens @ w


def density_estimate(trace: MixtureTrace, grid) -> np.ndarray:
    """Average over snapshots of the predictive density of observation ``n+1``."""
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0 or trace.snap_mu.size == 0:
        raise DomainError("need a non-empty trace and grid")
    cfg = trace.config
    lv, lv_next = trace.extra["lv"], trace.extra["lv_next"]
    sigma = cfg.model.sigma
    total = np.zeros(grid.size)
    count = 0
    for sizes, m, v, mu, tau in trace.snapshots():
        k = sizes.size
        w_old = np.exp(lv_next[k] - lv[k]) * (sizes - sigma)
        w_new = math.exp(lv_next[k + 1] - lv[k]) if np.isfinite(lv_next[k + 1]) else 0.0
        kv = 1.0 / v if cfg.v_role == "precision" else v
        dens = np.exp(-0.5 * (grid[:, None] - m) ** 2 / kv) / np.sqrt(2 * math.pi * kv)
        total += dens @ w_old
        if w_new > 0:
            total += w_new * base_marginal_density(grid, mu, tau, cfg.v_shape, cfg.v_rate,
                                                   cfg.v_role)
        count += 1
    return total / count


def cluster_marginal_loglik(y, mu: float, tau: float, v_shape: float = 2.0,
                            v_rate: float = 1.0, v_role: str = "variance") -> float:
    """``log int prod_i N(y_i | m, kv) N(m | mu, tau/v) Ga(v) dm dv`` for one cluster.

    ``kv`` is ``v`` or ``1/v`` according to ``v_role``.

    ``m`` is integrated in closed form; ``v`` by adaptive quadrature.  Used as
    an exact reference for small problems.
    """
    from scipy.integrate import quad

    y = np.asarray(y, dtype=float)
    c = y.size
    ybar = y.mean()
    ss = float(np.sum((y - ybar) ** 2))

    def log_integrand(logv):
        v = math.exp(logv)
        kv = 1.0 / v if v_role == "precision" else v
        # y ~ N(mu 1, kv I + (tau/v) 1 1^T)
        s2 = kv + c * tau / v
        out = (-0.5 * (c - 1) * math.log(2 * math.pi * kv) - 0.5 * ss / kv
               - 0.5 * math.log(2 * math.pi * s2 / c) - 0.5 * (ybar - mu) ** 2 / (s2 / c)
               - 0.5 * math.log(c))
        out += (v_shape * math.log(v_rate) - math.lgamma(v_shape)
                + v_shape * logv - v_rate * v)
        return out

    grid = np.linspace(-15, 8, 400)
    vals = np.array([log_integrand(u) for u in grid])
    peak = float(vals.max())
    val, _ = quad(lambda u: math.exp(log_integrand(u) - peak), -30, 10, limit=400,
                  points=[float(grid[np.argmax(vals)])])
    return peak + math.log(val)
