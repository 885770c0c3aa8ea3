"""Gibbs-type random partition priors: weights, clustering laws, species estimators and mixtures."""

from .errors import (ConvergenceError, DataError, DomainError, GibbsPriorError,
                     NoSolutionError, NumericalError, TruncationError)
from .models import (NGG, Dirichlet, GibbsModel, GnedinGamma, MixedFiniteDirichlet,
                     MixingPMF, Partition, PitmanYor, parse_model)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError", "DataError", "DomainError", "GibbsPriorError", "NoSolutionError",
    "NumericalError", "TruncationError",
    "NGG", "Dirichlet", "GibbsModel", "GnedinGamma", "MixedFiniteDirichlet", "MixingPMF",
    "Partition", "PitmanYor", "parse_model",
]
