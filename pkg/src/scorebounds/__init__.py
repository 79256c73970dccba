"""Bounds and classification under the maximum score model with partial identification."""

from .bounds import BoundInterval, BoundsSpec, Direction, bound_interval, bound_intervals, screen
from .classify import (
    CostTriple,
    Decision,
    NoClassificationError,
    Outcome,
    classify_abstain,
    classify_random,
    minimax_action,
    minimax_regret_prob,
    misclassification_bound,
    worst_case_loss,
)
from .confidence import HalfWidths, Variant, halfwidths, inv_norm_cdf
from .data import CsvSchema, Dataset, Design, GroupedData, ParseError, ValidationError, group, ingest_csv
from .lp import LinearProgram, LPResult, LPStatus, Sense, solve

__all__ = [
    "BoundInterval", "BoundsSpec", "Direction", "bound_interval", "bound_intervals", "screen",
    "CostTriple", "Decision", "NoClassificationError", "Outcome", "classify_abstain",
    "classify_random", "minimax_action", "minimax_regret_prob", "misclassification_bound",
    "worst_case_loss", "HalfWidths", "Variant", "halfwidths", "inv_norm_cdf", "CsvSchema",
    "Dataset", "Design", "GroupedData", "ParseError", "ValidationError", "group", "ingest_csv",
    "LinearProgram", "LPResult", "LPStatus", "Sense", "solve",
]
