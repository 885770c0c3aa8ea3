"""Command-line interface.

Every subcommand prints its primary result as JSON on stdout; bulk outputs
(pmfs, curves, traces) go to CSV files named with ``--out``.  Errors are
reported as a JSON object on stderr with exit code 2 (usage), 3 (invalid
data or parameters) or 4 (numerical failure).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .clustering import elicit, prior_Kn_pmf
from .consistency import TruthRegime, alpha_theoretical, alpha_trajectory
from .errors import DataError, DomainError, NumericalError
from .mixture import (MixtureConfig, density_estimate, fit, posterior_Kn_pmf,
                      simulate_toy_data)
from .models import Partition, eppf, log_eppf, parse_model, predictive_weights
from .species import (discovery_curve, discovery_prob_future, empirical_bayes_fit,
                      estimate_Km, good_toulmin, good_toulmin_curve, load_frequency_counts,
                      rare_variety, write_curve_csv)

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4

DEFAULT_SPECIES_DATA = "naegleria_aerobic.csv"
DEFAULT_SPECIES_MODEL = "py:0.66,155.5"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _emit(obj) -> None:
    json.dump(obj, sys.stdout, indent=2, default=_json_default)
    sys.stdout.write("\n")


def _json_default(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serializable: {type(x).__name__}")


def _freqs(text: str) -> Partition:
    try:
        freqs = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise DomainError(f"frequencies must be comma-separated integers, got {text!r}") from None
    return Partition(tuple(freqs))


# --------------------------------------------------------------------------
# subcommands


def cmd_eppf(args):
    model = parse_model(args.model)
    p = _freqs(args.freqs)
    _emit({"model": model.to_dict(), "frequencies": list(p.frequencies),
           "log_eppf": log_eppf(model, p), "eppf": eppf(model, p)})


def cmd_predict(args):
    model = parse_model(args.model)
    p = _freqs(args.freqs)
    w_new, w_old = predictive_weights(model, p)
    _emit({"model": model.to_dict(), "frequencies": list(p.frequencies),
           "prob_new": w_new, "prob_existing": list(map(float, w_old))})


def cmd_kn(args):
    model = parse_model(args.model)
    dist = prior_Kn_pmf(model, args.n)
    if args.out:
        dist.to_csv(args.out)
    _emit({"model": model.to_dict(), "n": args.n, "mean": dist.mean(), "var": dist.var(),
           "mode": dist.mode(), "pmf": dist.pmf})


def cmd_elicit(args):
    model = elicit(args.family, args.sigma, args.n, args.target)
    _emit({"model": model.to_dict(), "n": args.n, "target": args.target})


def _species_inputs(args):
    return load_frequency_counts(args.data), parse_model(args.model)


def cmd_species_km(args):
    s, model = _species_inputs(args)
    rep = estimate_Km(model, s, args.m, args.level, np.random.default_rng(args.seed))
    _emit({"n": s.n, "k": s.k, "m": args.m, **rep.to_dict()})


def cmd_species_rare(args):
    s, model = _species_inputs(args)
    res = rare_variety(model, s, args.m, args.tau)
    _emit({"n": s.n, "k": s.k, "m": args.m, "tau": args.tau, "model": model.to_dict(), **res})


def cmd_species_discovery(args):
    s, model = _species_inputs(args)
    out = {"n": s.n, "k": s.k, "m": args.m, "i": args.i, "model": model.to_dict(),
           "probability": discovery_prob_future(model, s, args.m, args.i)}
    if args.i == 0 and args.m >= 1:
        u, kk, flag = good_toulmin(s, args.m)
        out["good_toulmin"] = {"probability": u, "new_species": kk, "flag": flag}
    if args.curve:
        ms = np.arange(1, max(args.m, 1) + 1)
        bayes = discovery_curve(model, s, ms)
        gt, _, flags = good_toulmin_curve(s, ms)
        if args.out:
            write_curve_csv(args.out, ["m", "bayes", "good_toulmin", "gt_flag"],
                            [(int(m), b, g, int(f)) for m, b, g, f in zip(ms, bayes, gt, flags)])
        first = np.flatnonzero(flags)
        out["curve"] = {"points": int(ms.size),
                        "first_good_toulmin_flag": int(ms[first[0]]) if first.size else None}
    _emit(out)


def cmd_eb_fit(args):
    s = load_frequency_counts(args.data)
    res = empirical_bayes_fit(args.family, s)
    _emit({"n": s.n, "k": s.k, **res.to_dict()})


def _mixture_data(args):
    if args.data:
        try:
            y = np.loadtxt(args.data, dtype=float, ndmin=1)
        except (OSError, ValueError) as exc:
            raise DataError(f"cannot read observations from {args.data}: {exc}") from None
        return y
    return simulate_toy_data(args.data_seed, args.n)


def cmd_mixture_fit(args):
    model = parse_model(args.model)
    kw = dict(iters=args.iters, burnin=args.burnin, seed=args.seed, thin=args.thin)
    if args.reading == "escobar-west":
        config = MixtureConfig.escobar_west(model, **kw)
    else:
        config = MixtureConfig(model, **kw)
    y = _mixture_data(args)
    trace = fit(config, y)
    pmf, se = posterior_Kn_pmf(trace)
    if args.out:
        trace.to_csv(args.out)
    if args.kn_out:
        write_curve_csv(args.kn_out, ["k", "probability", "mc_se"],
                        [(k + 1, p, e) for k, (p, e) in enumerate(zip(pmf, se))])
    if args.density_out:
        grid = np.linspace(args.grid[0], args.grid[1], int(args.grid[2]))
        dens = density_estimate(trace, grid)
        write_curve_csv(args.density_out, ["y", "density"], zip(grid, dens))
    _emit({"model": model.to_dict(), "reading": args.reading, "n": int(y.size),
           "kept_draws": len(trace), "mode": int(np.argmax(pmf)) + 1,
           "posterior_Kn": {str(k + 1): float(p) for k, p in enumerate(pmf) if p > 0}})


def cmd_consistency(args):
    model = parse_model(args.model)
    regime = TruthRegime.parse(args.regime)
    alpha = alpha_theoretical(model, regime)
    reps = 1 if regime.kind == "diffuse" else args.replicates
    seeds = np.random.SeedSequence(args.seed).spawn(reps)

    def one(ss):
        return alpha_trajectory(model, regime, args.nmax, np.random.default_rng(ss), args.points)

    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        trajs = list(pool.map(one, seeds))
    finals = [t.final for t in trajs]
    if args.out:
        trajs[0].to_csv(args.out, alpha)
    mean = float(np.nanmean(finals)) if not all(map(math.isnan, finals)) else None
    _emit({"model": model.to_dict(), "regime": args.regime, "nmax": args.nmax,
           "replicates": reps, "final_ratio": mean, "alpha_theoretical": alpha})


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gibbsprior", description="Gibbs-type priors: partitions, species "
                "sampling, mixtures and consistency.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    model_help = ("model as family:params (dp:THETA, py:SIGMA,THETA, ngg:SIGMA,BETA, "
                  "gnedin:GAMMA, mfd:ABS_SIGMA,poisson|geometric|gnedin,PARAM), a JSON "
                  "string or a JSON file")

    e = sub.add_parser("eppf", help="probability of a partition")
    e.add_argument("--model", required=True, help=model_help)
    e.add_argument("--freqs", required=True, help="block sizes, e.g. 3,2,1")
    e.set_defaults(func=cmd_eppf)

    e = sub.add_parser("predict", help="predictive probabilities given a partition")
    e.add_argument("--model", required=True, help=model_help)
    e.add_argument("--freqs", required=True, help="block sizes, e.g. 3,2,1")
    e.set_defaults(func=cmd_predict)

    e = sub.add_parser("kn", help="prior distribution of the number of clusters")
    e.add_argument("--model", default="dp:19.233", help=model_help)
    e.add_argument("--n", type=int, required=True)
    e.add_argument("--out", help="CSV file (k,probability)")
    e.set_defaults(func=cmd_kn)

    e = sub.add_parser("elicit", help="solve E(K_n) = target for the free parameter")
    e.add_argument("--family", required=True, choices=["dp", "py", "ngg"])
    e.add_argument("--sigma", type=float, default=0.0)
    e.add_argument("--n", type=int, required=True)
    e.add_argument("--target", type=float, required=True)
    e.set_defaults(func=cmd_elicit)

    sp = sub.add_parser("species", help="species sampling estimators")
    ssub = sp.add_subparsers(dest="species_command", required=True, parser_class=_Parser)

    def species_common(q):
        q.add_argument("--data", default=DEFAULT_SPECIES_DATA,
                       help="frequency,count CSV (bare names resolve to bundled data)")
        q.add_argument("--model", default=DEFAULT_SPECIES_MODEL, help=model_help)
        q.add_argument("--m", type=int, required=True, help="size of the additional sample")
        q.add_argument("--seed", type=int, default=0)

    q = ssub.add_parser("km", help="number of new species in m further draws")
    species_common(q)
    q.add_argument("--level", type=float, default=0.95)
    q.set_defaults(func=cmd_species_km)

    q = ssub.add_parser("rare", help="species with frequency at most tau")
    species_common(q)
    q.add_argument("--tau", type=int, required=True)
    q.set_defaults(func=cmd_species_rare)

    q = ssub.add_parser("discovery", help="discovery probability at draw n+m+1")
    species_common(q)
    q.add_argument("--i", type=int, default=0, help="frequency class (0 = new species)")
    q.add_argument("--curve", action="store_true", help="evaluate m = 1..M as well")
    q.add_argument("--out", help="CSV file for the curve (m,bayes,good_toulmin,gt_flag)")
    q.set_defaults(func=cmd_species_discovery)

    e = sub.add_parser("eb-fit", help="empirical Bayes fit of the prior parameters")
    e.add_argument("--family", required=True, choices=["dp", "py", "ngg"])
    e.add_argument("--data", default="naegleria_anaerobic.csv")
    e.set_defaults(func=cmd_eb_fit)

    mx = sub.add_parser("mixture", help="Gaussian mixture with a Gibbs-type prior")
    msub = mx.add_subparsers(dest="mixture_command", required=True, parser_class=_Parser)
    q = msub.add_parser("fit", help="run the marginal sampler")
    q.add_argument("--model", default="py:0.73001,1", help=model_help)
    q.add_argument("--data", help="file with one observation per line (default: toy data)")
    q.add_argument("--data-seed", type=int, default=0)
    q.add_argument("--n", type=int, default=50, help="toy sample size")
    q.add_argument("--iters", type=int, default=100_000, help="sweeps kept after burn-in")
    q.add_argument("--burnin", type=int, default=5_000)
    q.add_argument("--thin", type=int, default=1)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--reading", choices=["literal", "escobar-west"], default="literal",
                   help="hyperprior convention")
    q.add_argument("--out", help="trace CSV (iteration,K,mu,tau)")
    q.add_argument("--kn-out", help="posterior K_n CSV (k,probability,mc_se)")
    q.add_argument("--density-out", help="density estimate CSV (y,density)")
    q.add_argument("--grid", type=float, nargs=3, default=(-5.0, 16.0, 400),
                   metavar=("LO", "HI", "POINTS"))
    q.set_defaults(func=cmd_mixture_fit)

    e = sub.add_parser("consistency", help="limit of the new-value probability")
    e.add_argument("--model", required=True, help=model_help)
    e.add_argument("--regime", default="diffuse", help="diffuse, uniform:N or geometric:Q")
    e.add_argument("--nmax", type=int, default=10_000)
    e.add_argument("--points", type=int, default=40)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--replicates", type=int, default=20, help="runs averaged for discrete truths")
    e.add_argument("--threads", type=int, default=1)
    e.add_argument("--out", help="trajectory CSV (n,ratio,alpha_theoretical)")
    e.set_defaults(func=cmd_consistency)
    return p


def _fail(code: int, kind: str, exc) -> int:
    err = {"error": kind, "message": str(exc)}
    line = getattr(exc, "line", None)
    if line is not None:
        err["line"] = line
    json.dump(err, sys.stderr)
    sys.stderr.write("\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.func(args)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", exc)
    except (DataError, DomainError, ValueError) as exc:
        return _fail(EXIT_DATA, type(exc).__name__, exc)
    except (NumericalError, ArithmeticError) as exc:
        return _fail(EXIT_NUMERIC, type(exc).__name__, exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
