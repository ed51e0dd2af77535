"""Penalized likelihood variable selection by perturbed MM iterations."""

__version__ = "0.1.0"

from .likelihood import Dataset, make_model, spline_basis
from .penalty import PenaltySpec, hard_threshold, lasso, lq, scad
from .solver import FitConfig, FitResult, fit, fit_lqa, fit_mle, rate_diagnostic
from .inference import CovarianceReport, sandwich_cov
from .selection import best_subset, gcv_select, oracle_fit

__all__ = [
    "__version__",
    "Dataset",
    "make_model",
    "spline_basis",
    "PenaltySpec",
    "scad",
    "lasso",
    "lq",
    "hard_threshold",
    "FitConfig",
    "FitResult",
    "fit",
    "fit_lqa",
    "fit_mle",
    "rate_diagnostic",
    "CovarianceReport",
    "sandwich_cov",
    "gcv_select",
    "best_subset",
    "oracle_fit",
]
