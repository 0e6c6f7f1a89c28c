"""Fusion-penalized logistic threshold regression.

Covariates are discretized at cut points found by bagged CART-style split
search; the logistic model on the resulting level indicators is fit with an
l1 penalty on adjacent-level differences.
"""

__version__ = "0.1.0"

from .data import DataError, Dataset, LabelCoding, load_csv, save_csv
from .encoding import DifferenceTransform, ThresholdedDesign, center, encode, from_theta, to_theta, transform_design
from .kernels import BACKEND
from .metrics import EvalReport, SelectionReport, auc, evaluate, murphy_scores, partial_auc, proper_scores
from .riskscore import RiskScoreTable, build_table, score_individual
from .selection import CvConfig, Metric, cv_k, cv_lambda, fit_cv
from .solver import (
    FilterModel,
    Method,
    SolverConfig,
    StepRule,
    classify,
    fit,
    fit_dataset,
    fit_path,
    loss_grad,
    predict_proba,
)
from .splits import (
    BaggingConfig,
    SplitCriterion,
    ThresholdSet,
    aggregate_thresholds,
    bagged_thresholds,
    best_split,
    estimate_thresholds,
    impurity,
    marginal_thresholds,
)

__all__ = [
    "BACKEND", "BaggingConfig", "CvConfig", "DataError", "Dataset", "DifferenceTransform", "EvalReport",
    "FilterModel", "LabelCoding", "Method", "Metric", "RiskScoreTable", "SelectionReport", "SolverConfig",
    "SplitCriterion", "StepRule", "ThresholdSet", "ThresholdedDesign", "aggregate_thresholds", "auc",
    "bagged_thresholds", "best_split", "build_table", "center", "classify", "cv_k", "cv_lambda", "encode",
    "estimate_thresholds", "evaluate", "fit", "fit_cv", "fit_dataset", "fit_path", "from_theta", "impurity",
    "load_csv", "loss_grad", "marginal_thresholds", "murphy_scores", "partial_auc", "predict_proba",
    "proper_scores", "save_csv", "score_individual", "to_theta", "transform_design",
]
