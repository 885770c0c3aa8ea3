"""Species discovery in two Naegleria EST libraries.

Fit a Pitman-Yor prior by empirical Bayes, then predict what a further
sample would reveal. The Bayesian discovery curve is compared with the
Good-Toulmin extrapolation, which degrades once m passes n.
"""

import numpy as np

from gibbsprior.species import (discovery_curve, discovery_prob_current, empirical_bayes_fit,
                                estimate_Km, good_toulmin_curve, load_frequency_counts,
                                rare_variety, turing_estimator)

for name in ("naegleria_aerobic.csv", "naegleria_anaerobic.csv"):
    s = load_frequency_counts(name)
    fit = empirical_bayes_fit("py", s)
    model = fit.model
    print(f"{name}: n={s.n}, k={s.k}, singletons={s.M(1)}")
    print(f"  empirical Bayes fit: {model}")
    print(f"  P(next read is new): Bayes {discovery_prob_current(model, s, 0):.4f}, "
          f"Turing {turing_estimator(s, 0):.4f}")
    for m in (s.n, 2 * s.n):
        rep = estimate_Km(model, s, m)
        lo, hi, _ = rep.credible_interval
        print(f"  new species in {m} more reads: {rep.estimate:.1f} (95% [{lo:.0f}, {hi:.0f}])")
    rv = rare_variety(model, s, s.n, 10)
    print(f"  species seen at most 10 times after {s.n} more reads: {rv['total']:.1f}")

    ms = np.array([100, 500, 1000, 1500, 2000, 3000])
    bayes = discovery_curve(model, s, ms)
    gt, _, flag = good_toulmin_curve(s, ms)
    print("       m   Bayes   Good-Toulmin")
    for m, b, g, f in zip(ms, bayes, gt, flag):
        print(f"  {m:6d}  {b:.4f}  {g:+.4f}{'  (inadmissible)' if f else ''}")
    print()
