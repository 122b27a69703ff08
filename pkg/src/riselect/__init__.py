"""Relative-importance rankings and variable selection for linear models."""

from .core import (
    ActiveSet,
    CoefficientVector,
    Dataset,
    RawData,
    RngStream,
    gaussian_vector,
    standardize,
)
from .ranking import RankingResult, rank, rank_cri, rank_criz, rank_gd, rank_sis
from .selection import (
    FitSequence,
    PenaltyGrid,
    best_subset,
    fit_ls_ri,
    fit_ridge_ri,
    forward_stepwise,
    lasso_path,
    relaxed_lasso_path,
)

__version__ = "0.1.0"
