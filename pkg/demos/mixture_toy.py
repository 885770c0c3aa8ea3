"""Posterior number of components in a normal mixture of 50 toy observations.

The data are drawn from an equal-weight mixture of N(1, 0.2) and N(10, 0.2).
Three priors elicited to agree on E(K_50) = 25 reach very different
posteriors: the flat Pitman-Yor and NGG priors let the data speak, while
the Dirichlet process remains anchored near its prior.
"""

import numpy as np

from gibbsprior import NGG, Dirichlet, PitmanYor
from gibbsprior.mixture import MixtureConfig, density_estimate, fit, posterior_Kn_pmf, simulate_toy_data

ITERS = 20_000  # raise to 100_000 for tighter Monte Carlo error

y = simulate_toy_data(0)
grid = np.array([-2.0, 1.0, 5.5, 10.0, 13.0])
for model in (PitmanYor(0.73001, 1.0), NGG(0.7353, 1.0), Dirichlet(19.233)):
    cfg = MixtureConfig.escobar_west(model, iters=ITERS, burnin=2_000, seed=0)
    trace = fit(cfg, y)
    pmf, se = posterior_Kn_pmf(trace)
    top = np.argsort(pmf)[::-1][:3]
    print(f"{model}")
    print("  most likely K: " + ", ".join(f"{k + 1} ({pmf[k]:.3f} +/- {se[k]:.3f})" for k in top))
    dens = density_estimate(trace, grid)
    print("  density at " + ", ".join(f"{g:g}:{d:.3f}" for g, d in zip(grid, dens)))
