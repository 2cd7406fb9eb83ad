"""Numerical bounds on the p-satisfiability threshold of random k-CNF formulas."""

from psatbounds.analytic import (
    DensityBounds,
    ProblemParams,
    cghs_bounds,
    delta_rate,
    density_bounds,
    lemma2_upper,
    t_lower,
    threshold_T,
)
from psatbounds.tuning import TunedWeights, tuned_weights

__version__ = "0.1.0"

__all__ = [
    "DensityBounds",
    "ProblemParams",
    "TunedWeights",
    "cghs_bounds",
    "delta_rate",
    "density_bounds",
    "lemma2_upper",
    "t_lower",
    "threshold_T",
    "tuned_weights",
    "__version__",
]
