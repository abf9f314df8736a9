"""Isolation forests with depth-based feature importance (DIFFI)."""

__version__ = "0.1.0"

from ._backend import BACKEND
from .diffi import ImportanceReport, InlierExplanationWarning, global_diffi, induced_imbalance, local_diffi, rank_features
from .errors import (
    CorruptFileError,
    DegenerateImportanceError,
    FeatureSelectionError,
    InvalidArgumentError,
    InvalidDataError,
    ParseError,
    UnsupportedVersionError,
)
from .forest import DataMatrix, ForestModel, IsolationTree, anomaly_score, fit, path_length, predict
from .metrics import emd_locations, ordered_emd, t_top_k
from .selection import AggregatedScores, evaluate_topk, rank_update, select_features

__all__ = [
    "BACKEND",
    "AggregatedScores",
    "CorruptFileError",
    "DataMatrix",
    "DegenerateImportanceError",
    "FeatureSelectionError",
    "ForestModel",
    "ImportanceReport",
    "InlierExplanationWarning",
    "InvalidArgumentError",
    "InvalidDataError",
    "IsolationTree",
    "ParseError",
    "UnsupportedVersionError",
    "anomaly_score",
    "emd_locations",
    "evaluate_topk",
    "fit",
    "global_diffi",
    "induced_imbalance",
    "local_diffi",
    "ordered_emd",
    "path_length",
    "predict",
    "rank_features",
    "rank_update",
    "select_features",
    "t_top_k",
]
