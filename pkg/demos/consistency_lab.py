"""When does the predictive of a Gibbs-type prior recover the truth?

Under a diffuse truth every draw is new, and the posterior probability of
a new value settles at a model-dependent limit alpha. A positive alpha
means the predictive keeps mass on a spurious component. Under a discrete
truth with finitely many atoms the probability vanishes for every model.
"""

import numpy as np

from gibbsprior import NGG, Dirichlet, GnedinGamma, MixedFiniteDirichlet, MixingPMF, PitmanYor
from gibbsprior.consistency import TruthRegime, alpha_theoretical, alpha_trajectory

models = {"DP(5)": Dirichlet(5.0), "PY(0.25, 1)": PitmanYor(0.25, 1.0),
          "NGG(0.5, 1)": NGG(0.5, 1.0), "Gnedin(0.5)": GnedinGamma(0.5),
          "finite Dirichlet, Poisson(5) mixing": MixedFiniteDirichlet(1.0, MixingPMF.poisson(5.0)),
          "finite Dirichlet, geometric(0.5) mixing":
              MixedFiniteDirichlet(1.0, MixingPMF.geometric(0.5))}

print("Diffuse truth, n = 10000")
for name, model in models.items():
    traj = alpha_trajectory(model, TruthRegime.diffuse(), 10_000)
    alpha = alpha_theoretical(model, TruthRegime.diffuse())
    print(f"  {name:40s} ratio {traj.final:.4f}  limit {alpha:.4f}")

print("\nUniform truth on 5 atoms, n = 10000")
rng = np.random.default_rng(0)
for name, model in models.items():
    traj = alpha_trajectory(model, TruthRegime.uniform(5), 10_000, rng)
    print(f"  {name:40s} ratio {traj.final:.2e}")
