"""Detector lifecycle over test batches under the retraining regimes.

Data regimes decide *what* a retrain sees (static, full history, sliding
window); frequency regimes decide *when* it happens (every batch, or only on
a drift signal). Each batch is scored with the current model first; a retrain
happens afterwards and absorbs that batch with its ground-truth labels.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from . import detectors
from .detectors import DetectorSpec
from .evaluation import adjust_predictions, confusion, metrics
from .fedd import DriftSignal, DriftStatus, FeddConfig, fedd_monitor
from .series import Batch, LabeledSeries, make_batches, split_half


class DataKind(str, enum.Enum):
    STATIC = "static"
    FULL_HISTORY = "full_history"
    SLIDING_WINDOW = "sliding_window"


class FrequencyRegime(str, enum.Enum):
    BLIND = "blind"
    INFORMED = "informed"


class Trigger(str, enum.Enum):
    SCHEDULE = "schedule"
    DRIFT = "drift"


_SHORT = {DataKind.FULL_HISTORY: "fh", DataKind.SLIDING_WINDOW: "sw"}


@dataclass(frozen=True, slots=True)
class DataRegime:
    kind: DataKind
    window_len: int | None = None  # sliding window only; None = initial training length

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", DataKind(self.kind))
        if self.window_len is not None:
            if self.kind is not DataKind.SLIDING_WINDOW:
                raise ValueError("window_len only applies to the sliding-window regime")
            if self.window_len < 1:
                raise ValueError("window_len must be >= 1")

    @classmethod
    def static(cls) -> "DataRegime":
        return cls(DataKind.STATIC)

    @classmethod
    def full_history(cls) -> "DataRegime":
        return cls(DataKind.FULL_HISTORY)

    @classmethod
    def sliding_window(cls, window_len: int | None = None) -> "DataRegime":
        return cls(DataKind.SLIDING_WINDOW, window_len)


def scenario_name(data: DataRegime, freq: FrequencyRegime | str) -> str:
    if data.kind is DataKind.STATIC:
        return "static"
    name = f"{FrequencyRegime(freq).value}-{_SHORT[data.kind]}"
    return f"{name}{data.window_len}" if data.window_len else name


@dataclass(frozen=True, slots=True)
class RetrainEvent:
    batch_index: int
    train_range: range
    trigger: Trigger


@dataclass(eq=False)
class RunRecord:
    series_id: str
    detector: DetectorSpec
    data: DataRegime
    frequency: FrequencyRegime
    train_range: range
    batches: list[Batch]
    predictions: list[np.ndarray]
    events: list[RetrainEvent] = field(default_factory=list)
    drift_signals: list[DriftSignal] | None = None
    seed: int = 0

    @property
    def scenario(self) -> str:
        return scenario_name(self.data, self.frequency)

    @property
    def test_range(self) -> range:
        return range(self.batches[0].start, self.batches[-1].end)

    def all_predictions(self) -> np.ndarray:
        return np.concatenate(self.predictions)

    def to_dict(self) -> dict:
        return {
            "series_id": self.series_id,
            "scenario": self.scenario,
            "detector": self.detector.to_dict(),
            "data_regime": {"kind": self.data.kind.value, "window_len": self.data.window_len},
            "frequency": self.frequency.value,
            "seed": self.seed,
            "train_range": [self.train_range.start, self.train_range.stop],
            "batches": [
                {"index": b.index, "start": b.start, "end": b.end, "predictions": p.astype(int).tolist()}
                for b, p in zip(self.batches, self.predictions)
            ],
            "retrain_events": [
                {
                    "batch_index": e.batch_index,
                    "train_start": e.train_range.start,
                    "train_end": e.train_range.stop,
                    "trigger": e.trigger.value,
                }
                for e in self.events
            ],
            "drift_signals": None
            if self.drift_signals is None
            else [{"batch_index": s.batch_index, "status": s.status.value} for s in self.drift_signals],
        }


class SeriesRunError(RuntimeError):
    def __init__(self, series_id: str, batch_index: int | None, cause: Exception):
        where = f"batch {batch_index}" if batch_index is not None else "initial fit"
        super().__init__(f"series {series_id}, {where}: {cause}")
        self.series_id = series_id
        self.batch_index = batch_index


def plan_train_range(regime: DataRegime, initial_train: range, completed_batches: Sequence[Batch]) -> range:
    if regime.kind is DataKind.STATIC:
        return initial_train
    end = completed_batches[-1].end if completed_batches else initial_train.stop
    if completed_batches and completed_batches[0].start != initial_train.stop:
        raise ValueError("batches must start where the initial training range ends")
    if regime.kind is DataKind.FULL_HISTORY:
        return range(initial_train.start, end)
    window = regime.window_len or len(initial_train)
    if end - window < 0:
        raise ValueError(f"sliding window of {window} points exceeds the {end} points of history")
    return range(end - window, end)


def decide_retrain(
    freq: FrequencyRegime | str, batch_index: int, drift_signals: Sequence[DriftSignal] | None = None
) -> tuple[bool, Trigger]:
    freq = FrequencyRegime(freq)
    if freq is FrequencyRegime.BLIND:
        return True, Trigger.SCHEDULE
    by_index = {s.batch_index: s for s in drift_signals or ()}
    if batch_index not in by_index:
        raise ValueError(f"informed retraining needs a drift signal for batch {batch_index}")
    return by_index[batch_index].status is DriftStatus.DRIFT, Trigger.DRIFT


def run_series(
    series: LabeledSeries,
    detector: DetectorSpec,
    data: DataRegime,
    freq: FrequencyRegime | str,
    batch_len: int,
    *,
    train_len: int | None = None,
    monitor: FeddConfig | None = None,
    drift_signals: Sequence[DriftSignal] | None = None,
    seed: int = 0,
) -> RunRecord:
    """Score every test batch, retraining between batches as the regimes dictate.

    ``train_len`` overrides the half/half split. Informed runs use
    ``drift_signals`` when given, otherwise FEDD with ``monitor`` settings.
    No retrain follows the final batch.
    """
    freq = FrequencyRegime(freq)
    if train_len is None:
        train, test = split_half(series)
    else:
        if not 1 <= train_len < len(series):
            raise ValueError(f"train_len {train_len} invalid for series of length {len(series)}")
        train, test = range(0, train_len), range(train_len, len(series))
    batches = make_batches(test, batch_len)

    signals = None
    if freq is FrequencyRegime.INFORMED:
        if drift_signals is None:
            try:
                signals = fedd_monitor(series, train, batches, monitor or FeddConfig())
            except Exception as exc:
                raise SeriesRunError(series.id, None, exc) from exc
        else:
            signals = list(drift_signals)

    try:
        model = detectors.fit(detector.kind, detector.params, series, train)
    except Exception as exc:
        raise SeriesRunError(series.id, None, exc) from exc

    predictions, events = [], []
    for batch in batches:
        try:
            predictions.append(detectors.classify(model, series, batch))
            if batch.index == len(batches) - 1 or data.kind is DataKind.STATIC:
                continue
            retrain, trigger = decide_retrain(freq, batch.index, signals)
            if retrain:
                rng = plan_train_range(data, train, batches[: batch.index + 1])
                model = detectors.fit(detector.kind, detector.params, series, rng)
                events.append(RetrainEvent(batch.index, rng, trigger))
        except SeriesRunError:
            raise
        except Exception as exc:
            raise SeriesRunError(series.id, batch.index, exc) from exc
    return RunRecord(series.id, detector, data, freq, train, batches, predictions, events, signals, seed)


# ------------------------------------------------------------ grid search


@dataclass
class GridRow:
    params: dict[str, Any]
    mean_f1: float
    f1: list[float]
    predictions: list[np.ndarray]


@dataclass
class GridResult:
    best_params: dict[str, Any]
    best_score: float
    table: list[GridRow]


def expand_grid(grid: Mapping[str, Iterable[Any]] | Sequence[Mapping[str, Any]]) -> list[dict[str, Any]]:
    if isinstance(grid, Mapping):
        keys = list(grid)
        return [dict(zip(keys, combo)) for combo in itertools.product(*(list(grid[k]) for k in keys))]
    return [dict(p) for p in grid]


def sota_predictions(series: LabeledSeries, detector: DetectorSpec) -> np.ndarray:
    """Fit on the first half, score the whole second half at once."""
    train, test = split_half(series)
    model = detectors.fit(detector.kind, detector.params, series, train)
    return detectors.classify(model, series, test)


def grid_search(
    kind: detectors.DetectorKind | str,
    grid: Mapping[str, Iterable[Any]] | Sequence[Mapping[str, Any]],
    series_list: Sequence[LabeledSeries],
    delay: int = 0,
) -> GridResult:
    """Exhaustive search by mean per-series F1 in the half/half setup.

    Ties keep the earliest grid point.
    """
    points = expand_grid(grid)
    if not points:
        raise ValueError("empty parameter grid")
    if not series_list:
        raise ValueError("grid search needs at least one series")
    table = []
    for params in points:
        spec = DetectorSpec.create(kind, params)
        f1s, preds = [], []
        for s in series_list:
            p = sota_predictions(s, spec)
            test_labels = s.labels[len(s) // 2 :]
            f1s.append(metrics(confusion(test_labels, adjust_predictions(test_labels, p, delay))).f1)
            preds.append(p)
        table.append(GridRow(params, float(np.mean(f1s)), f1s, preds))
    best = max(range(len(table)), key=lambda i: (table[i].mean_f1, -i))
    return GridResult(table[best].params, table[best].mean_f1, table)
