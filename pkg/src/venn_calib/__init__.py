"""Venn-Abers calibration of binary scoring classifiers."""

from .calibrators import (
    FittedDIR,
    FittedSVA,
    dir_fit,
    dir_predict,
    sva_fit,
    sva_predict,
    va_predict,
    va_taxonomy,
)
from .isotonic import IsotonicCalibrator, ScoredLabel, brute_force_isotonic_oracle, evaluate, evaluate_nearest, fit_pava, log_likelihood
from .merging import merge_log, merge_mean, merge_square
from .venn import (
    Bag,
    MultiProbPrediction,
    Observation,
    ProbabilityInterval,
    Taxonomy,
    check_equivariance,
    label_taxonomy,
    observations,
    probability_interval,
    trivial_taxonomy,
    venn_predict,
)

__version__ = "0.1.0"

__all__ = [
    "FittedDIR",
    "FittedSVA",
    "dir_fit",
    "dir_predict",
    "sva_fit",
    "sva_predict",
    "va_predict",
    "va_taxonomy",
    "IsotonicCalibrator",
    "ScoredLabel",
    "brute_force_isotonic_oracle",
    "evaluate",
    "evaluate_nearest",
    "fit_pava",
    "log_likelihood",
    "merge_log",
    "merge_mean",
    "merge_square",
    "Bag",
    "MultiProbPrediction",
    "Observation",
    "ProbabilityInterval",
    "Taxonomy",
    "check_equivariance",
    "label_taxonomy",
    "observations",
    "probability_interval",
    "trivial_taxonomy",
    "venn_predict",
]
