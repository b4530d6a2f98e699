"""Delay-adjusted scoring, metric aggregation and the Wilcoxon signed-rank test."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Literal, Mapping, Sequence

import numpy as np
from scipy.stats import norm, rankdata

from .series import segments_from_labels

EXACT_MAX_N = 20
MIN_PAIRS = 5


@dataclass(frozen=True, slots=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True, slots=True)
class MetricTriple:
    precision: float
    recall: float
    f1: float

    def as_dict(self) -> dict[str, float]:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}


def _bits(x, name: str) -> np.ndarray:
    arr = np.asarray(x)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D")
    return (arr != 0).astype(np.uint8)


def adjust_predictions(labels, preds, delay: int, *, zero_missed: bool = True) -> np.ndarray:
    """Point-adjust predictions with a detection delay.

    A ground-truth segment ``[s, e]`` counts as detected, and is filled with
    ones, if any prediction falls in ``[s, min(e, s + delay)]``. Otherwise the
    segment is cleared (``zero_missed``) or left as predicted. Bits outside
    segments are never touched.
    """
    lab, pred = _bits(labels, "labels"), _bits(preds, "preds")
    if lab.shape != pred.shape:
        raise ValueError(f"length mismatch: {len(lab)} labels vs {len(pred)} predictions")
    if delay < 0:
        raise ValueError("delay must be >= 0")
    out = pred.copy()
    for seg in segments_from_labels(lab):
        hit = pred[seg.start : min(seg.end, seg.start + delay) + 1].any()
        if hit:
            out[seg.start : seg.end + 1] = 1
        elif zero_missed:
            out[seg.start : seg.end + 1] = 0
    return out


def confusion(labels, adjusted) -> ConfusionCounts:
    lab, pred = _bits(labels, "labels").astype(bool), _bits(adjusted, "predictions").astype(bool)
    if lab.shape != pred.shape:
        raise ValueError(f"length mismatch: {len(lab)} labels vs {len(pred)} predictions")
    return ConfusionCounts(
        tp=int(np.sum(lab & pred)),
        fp=int(np.sum(~lab & pred)),
        fn=int(np.sum(lab & ~pred)),
        tn=int(np.sum(~lab & ~pred)),
    )


def metrics(c: ConfusionCounts) -> MetricTriple:
    precision = c.tp / (c.tp + c.fp) if c.tp + c.fp else 0.0
    recall = c.tp / (c.tp + c.fn) if c.tp + c.fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return MetricTriple(precision, recall, f1)


def score(labels, preds, delay: int = 0, *, zero_missed: bool = True) -> tuple[ConfusionCounts, MetricTriple]:
    c = confusion(labels, adjust_predictions(labels, preds, delay, zero_missed=zero_missed))
    return c, metrics(c)


def delay_curve(labels, preds, delays: Iterable[int] | int, *, zero_missed: bool = True) -> list[MetricTriple]:
    """Metrics at each delay; an int ``D`` means delays ``0..D``."""
    if isinstance(delays, int):
        if delays < 0:
            raise ValueError("maximum delay must be >= 0")
        delays = range(delays + 1)
    return [score(labels, preds, d, zero_missed=zero_missed)[1] for d in delays]


def aggregate(per_series: Sequence[MetricTriple]) -> MetricTriple:
    """Unweighted mean of each metric across series."""
    if not per_series:
        raise ValueError("nothing to aggregate")
    return MetricTriple(
        float(np.mean([m.precision for m in per_series])),
        float(np.mean([m.recall for m in per_series])),
        float(np.mean([m.f1 for m in per_series])),
    )


# ---------------------------------------------------------------- Wilcoxon


@dataclass(frozen=True)
class ComparisonResult:
    scenario_a: str
    scenario_b: str
    a: tuple[float, ...]
    b: tuple[float, ...]
    w: float
    w_plus: float
    w_minus: float
    n: int
    p_value: float
    alpha: float
    method: Literal["exact", "normal"]

    @property
    def significant(self) -> bool:
        return self.p_value < self.alpha

    @property
    def direction(self) -> str:
        """Which side has the larger values: "a", "b", or "none"."""
        if self.w_plus > self.w_minus:
            return "a"
        if self.w_minus > self.w_plus:
            return "b"
        return "none"

    def as_dict(self) -> dict:
        return {
            "a": self.scenario_a,
            "b": self.scenario_b,
            "W": self.w,
            "p": self.p_value,
            "significant": self.significant,
            "n": self.n,
            "method": self.method,
            "direction": self.direction,
        }


class InsufficientPairs(ValueError):
    pass


def _exact_lower_tail(doubled_ranks: np.ndarray, w2: int) -> float:
    """P(W+ <= w) under the null, for integer ranks scaled by two."""
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1, dtype=object)
    counts[0] = 1
    for r in doubled_ranks:
        r = int(r)
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total + 1 - r]
        counts = counts + shifted
    n = len(doubled_ranks)
    return float(sum(counts[: w2 + 1])) / float(2**n)


def wilcoxon_signed_rank(
    a: Sequence[float],
    b: Sequence[float],
    alpha: float = 0.10,
    *,
    names: tuple[str, str] = ("a", "b"),
) -> ComparisonResult:
    """Two-sided Wilcoxon signed-rank test on paired values.

    Zero differences are dropped and tied magnitudes share average ranks.
    Up to 20 pairs the null distribution is enumerated exactly, beyond that a
    normal approximation with continuity and tie correction is used.
    """
    x, y = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("paired samples must be 1-D and equally long")
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    diff = x - y
    diff = diff[diff != 0]
    n = len(diff)
    if n < MIN_PAIRS:
        raise InsufficientPairs(f"insufficient pairs: {n} non-zero differences, need {MIN_PAIRS}")
    ranks = rankdata(np.abs(diff))
    w_plus = float(ranks[diff > 0].sum())
    w_minus = float(ranks[diff < 0].sum())
    w = min(w_plus, w_minus)
    if n <= EXACT_MAX_N:
        doubled = np.rint(2 * ranks).astype(np.int64)
        p = min(1.0, 2 * _exact_lower_tail(doubled, int(round(2 * w))))
        method = "exact"
    else:
        mean = n * (n + 1) / 4
        _, tie_counts = np.unique(ranks, return_counts=True)
        var = n * (n + 1) * (2 * n + 1) / 24 - np.sum(tie_counts**3 - tie_counts) / 48
        z = (w - mean + 0.5) / math.sqrt(var)
        p = min(1.0, 2 * float(norm.cdf(z)))
        method = "normal"
    return ComparisonResult(names[0], names[1], tuple(x), tuple(y), w, w_plus, w_minus, n, p, alpha, method)


# ------------------------------------------------------------- drift summary


def drift_period_summary(
    signals: Mapping[str, Sequence], mode: Literal["per_period", "first_drift"] = "per_period"
) -> list[tuple[int, float]]:
    """Fraction of series in drift per period.

    ``per_period`` counts every drift signal; ``first_drift`` counts a series
    only at its first drift. Series without a signal for a period are left
    out of that period's denominator.
    """
    if mode not in ("per_period", "first_drift"):
        raise ValueError(f"unknown mode {mode!r}")
    hits: dict[int, int] = {}
    seen: dict[int, int] = {}
    for sigs in signals.values():
        drifted = False
        for s in sorted(sigs, key=lambda s: s.batch_index):
            seen[s.batch_index] = seen.get(s.batch_index, 0) + 1
            is_drift = getattr(s.status, "value", s.status) == "drift"
            if is_drift and (mode == "per_period" or not drifted):
                hits[s.batch_index] = hits.get(s.batch_index, 0) + 1
            drifted = drifted or is_drift
    return [(p, hits.get(p, 0) / seen[p]) for p in sorted(seen)]
