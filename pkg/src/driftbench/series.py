"""Labeled univariate time series, splitting, batching and segment helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

MIN_SPLIT_LENGTH = 4
MIN_BATCH_LENGTH = 2


class TimePoint(NamedTuple):
    timestamp: int
    value: float


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LabeledSeries:
    """A fixed-granularity univariate series with per-point 0/1 anomaly labels.

    Arrays are copied and made read-only on construction.
    """

    id: str
    granularity_s: int
    timestamps: np.ndarray
    values: np.ndarray
    labels: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        ts = np.asarray(self.timestamps)
        if ts.dtype.kind not in "iu":
            if not np.all(np.isfinite(ts)) or not np.all(ts == np.round(ts)):
                raise ValueError(f"{self.id}: timestamps must be finite integers")
        ts = ts.astype(np.int64)
        values = np.asarray(self.values, dtype=np.float64)
        labels = np.asarray(self.labels)
        if self.granularity_s <= 0:
            raise ValueError(f"{self.id}: granularity_s must be positive")
        if ts.ndim != 1 or values.shape != ts.shape or labels.shape != ts.shape:
            raise ValueError(f"{self.id}: timestamps, values and labels must be 1-D and equally long")
        if len(ts) < 2:
            raise ValueError(f"{self.id}: series needs at least 2 points")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"{self.id}: values must be finite")
        if not np.all((labels == 0) | (labels == 1)):
            raise ValueError(f"{self.id}: labels must be 0/1")
        deltas = np.diff(ts)
        if np.any(deltas <= 0):
            raise ValueError(f"{self.id}: timestamps must be strictly increasing")
        if np.any(deltas != self.granularity_s):
            raise ValueError(f"{self.id}: timestamp deltas must equal granularity {self.granularity_s}s")
        object.__setattr__(self, "timestamps", _frozen(ts))
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "labels", _frozen(labels.astype(np.uint8)))

    def __len__(self) -> int:
        return len(self.values)

    @property
    def points(self) -> list[TimePoint]:
        return [TimePoint(int(t), float(v)) for t, v in zip(self.timestamps, self.values)]

    @classmethod
    def from_values(
        cls,
        values: Sequence[float],
        labels: Sequence[int] | None = None,
        *,
        id: str = "series",
        granularity_s: int = 1,
        start: int = 0,
    ) -> "LabeledSeries":
        values = np.asarray(values, dtype=np.float64)
        if labels is None:
            labels = np.zeros(len(values), dtype=np.uint8)
        ts = start + granularity_s * np.arange(len(values), dtype=np.int64)
        return cls(id=id, granularity_s=granularity_s, timestamps=ts, values=values, labels=np.asarray(labels))


@dataclass(frozen=True, slots=True)
class AnomalySegment:
    start: int
    end: int  # inclusive

    def __len__(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True, slots=True)
class SplitSpec:
    train_len: int
    batch_len: int

    def __post_init__(self) -> None:
        if self.train_len < 1:
            raise ValueError("train_len must be >= 1")
        if self.batch_len < MIN_BATCH_LENGTH:
            raise ValueError(f"batch_len must be >= {MIN_BATCH_LENGTH}")


@dataclass(frozen=True, slots=True)
class Batch:
    index: int
    start: int
    end: int  # exclusive

    def __post_init__(self) -> None:
        if self.start >= self.end:
            raise ValueError(f"empty batch [{self.start}, {self.end})")

    def __len__(self) -> int:
        return self.end - self.start

    @property
    def range(self) -> range:
        return range(self.start, self.end)


def split_half(series: LabeledSeries | int) -> tuple[range, range]:
    """Train on the first ``floor(n/2)`` points, test on the rest."""
    n = series if isinstance(series, int) else len(series)
    if n < MIN_SPLIT_LENGTH:
        raise ValueError("series too short to split")
    half = n // 2
    return range(0, half), range(half, n)


def make_batches(test: range, batch_len: int) -> list[Batch]:
    """Tile ``test`` with consecutive batches of ``batch_len`` points.

    A trailing remainder of at least two points becomes a short final batch;
    a single leftover point is merged into the previous batch.
    """
    if batch_len < MIN_BATCH_LENGTH:
        raise ValueError(f"batch_len must be >= {MIN_BATCH_LENGTH}")
    if len(test) == 0:
        raise ValueError("empty test range")
    if test.step != 1:
        raise ValueError("test range must be contiguous")
    bounds = list(range(test.start, test.stop, batch_len)) + [test.stop]
    if len(bounds) > 2 and bounds[-1] - bounds[-2] < MIN_BATCH_LENGTH:
        del bounds[-2]
    return [Batch(i, s, e) for i, (s, e) in enumerate(zip(bounds[:-1], bounds[1:]))]


def segments_from_labels(labels: Iterable[int]) -> list[AnomalySegment]:
    lab = np.asarray(list(labels) if not isinstance(labels, np.ndarray) else labels).astype(np.int8)
    if lab.size == 0:
        return []
    padded = np.concatenate(([0], (lab != 0).astype(np.int8), [0]))
    edges = np.diff(padded)
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1) - 1
    return [AnomalySegment(int(s), int(e)) for s, e in zip(starts, ends)]


def labels_from_segments(segments: Iterable[AnomalySegment], length: int) -> np.ndarray:
    out = np.zeros(length, dtype=np.uint8)
    for seg in segments:
        out[seg.start : seg.end + 1] = 1
    return out


def interpolate_flagged(values: np.ndarray, flags: np.ndarray) -> np.ndarray:
    """Replace flagged points by linear interpolation between clean neighbours.

    Leading and trailing flagged runs take the nearest clean value.
    """
    values = np.asarray(values, dtype=np.float64)
    flags = np.asarray(flags).astype(bool)
    clean = ~flags
    if not clean.any():
        raise ValueError("no clean data")
    if clean.all():
        return values.copy()
    idx = np.arange(len(values))
    out = values.copy()
    out[flags] = np.interp(idx[flags], idx[clean], values[clean])
    return out


def remove_anomalies_interpolate(series: LabeledSeries, rng: range) -> np.ndarray:
    _check_range(rng, len(series))
    return interpolate_flagged(series.values[rng.start : rng.stop], series.labels[rng.start : rng.stop])


def _check_range(rng: range, n: int) -> None:
    if rng.step != 1 or rng.start < 0 or rng.stop > n or len(rng) == 0:
        raise ValueError(f"range [{rng.start}, {rng.stop}) invalid for series of length {n}")


def repair_gaps(
    timestamps: np.ndarray,
    values: np.ndarray,
    labels: np.ndarray,
    granularity_s: int,
    *,
    max_missing_fraction: float = 0.05,
    name: str = "series",
) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """Fill missing timestamps on the fixed grid by linear interpolation.

    Inserted points are unlabeled. Returns the repaired arrays and the number
    of inserted points; more than ``max_missing_fraction`` missing is an error.
    """
    ts = np.asarray(timestamps, dtype=np.int64)
    deltas = np.diff(ts)
    if np.any(deltas <= 0):
        bad = int(np.flatnonzero(deltas <= 0)[0]) + 1
        raise ValueError(f"{name}: non-monotone timestamp at row {bad + 1}")
    if np.any(deltas % granularity_s):
        raise ValueError(f"{name}: timestamps are not on a {granularity_s}s grid")
    if np.all(deltas == granularity_s):
        return ts, np.asarray(values, dtype=np.float64), np.asarray(labels, dtype=np.uint8), 0
    grid = np.arange(ts[0], ts[-1] + granularity_s, granularity_s, dtype=np.int64)
    missing = len(grid) - len(ts)
    if missing > math.floor(max_missing_fraction * len(grid)):
        raise ValueError(
            f"{name}: {missing} of {len(grid)} timestamps missing, above the {max_missing_fraction:.0%} repair cap"
        )
    filled = np.interp(grid, ts, np.asarray(values, dtype=np.float64))
    lab = np.zeros(len(grid), dtype=np.uint8)
    lab[np.searchsorted(grid, ts)] = labels
    return grid, filled, lab, missing
