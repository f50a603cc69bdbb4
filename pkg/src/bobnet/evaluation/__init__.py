"""Evaluation metrics."""

from .comparison import compare_predictions
from .metrics import (
    AggregateReport,
    DetectionReport,
    LocalizationReport,
    McNemarResult,
    aggregate_report,
    centroid_distance,
    detection_report,
    f1_score,
    mcnemar,
    wall_distances,
)

__all__ = [
    "compare_predictions",
    "AggregateReport",
    "DetectionReport",
    "LocalizationReport",
    "McNemarResult",
    "aggregate_report",
    "centroid_distance",
    "detection_report",
    "f1_score",
    "mcnemar",
    "wall_distances",
]
