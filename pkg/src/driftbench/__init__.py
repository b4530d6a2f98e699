"""Anomaly-detector maintenance benchmark: detectors, drift monitoring, retraining regimes and evaluation."""

from __future__ import annotations

__version__ = "0.1.0"

from .detectors import DetectorKind, DetectorSpec, classify, fit
from .evaluation import adjust_predictions, confusion, metrics, wilcoxon_signed_rank
from .fedd import FeddConfig, extract_features, fedd_monitor
from .harness import DataRegime, FrequencyRegime, run_series
from .series import LabeledSeries, make_batches, segments_from_labels, split_half

__all__ = [
    "DataRegime",
    "DetectorKind",
    "DetectorSpec",
    "FeddConfig",
    "FrequencyRegime",
    "LabeledSeries",
    "__version__",
    "adjust_predictions",
    "classify",
    "confusion",
    "extract_features",
    "fedd_monitor",
    "fit",
    "make_batches",
    "metrics",
    "run_series",
    "segments_from_labels",
    "split_half",
    "wilcoxon_signed_rank",
]
