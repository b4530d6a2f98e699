"""Benchmark loaders, manifest checks and the seeded synthetic generator.

Synthetic noise is drawn from numpy's ``PCG64`` bit generator seeded with the
spec's 64-bit seed, using ``Generator.standard_normal`` (ziggurat) scaled by
``noise_sigma``. One draw is taken per point, in index order, so a port that
reproduces PCG64 + numpy's ziggurat reproduces the stream exactly.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

from .series import LabeledSeries, repair_gaps

logger = logging.getLogger(__name__)

YAHOO_GRANULARITY_S = 3600
NAB_GRANULARITY_S = 300

AnomalyKind = Literal["spike", "level_shift"]
DriftKind = Literal["mean_shift", "variance_shift", "period_change"]


class DataError(ValueError):
    """Raised when dataset files are missing or malformed."""


# ---------------------------------------------------------------- manifests


@dataclass(frozen=True, slots=True)
class DatasetManifest:
    name: str
    series_count: int
    granularity_s: int
    min_len: int
    max_len: int

    def __post_init__(self) -> None:
        if self.min_len > self.max_len:
            raise ValueError("min_len must be <= max_len")
        if self.series_count < 1:
            raise ValueError("series_count must be >= 1")


YAHOO_A1_MANIFEST = DatasetManifest("yahoo_a1", 67, YAHOO_GRANULARITY_S, 741, 1461)
NAB_CLOUDWATCH_MANIFEST = DatasetManifest("nab_cloudwatch", 17, NAB_GRANULARITY_S, 1243, 4730)


def validate_manifest(series: Sequence[LabeledSeries], manifest: DatasetManifest) -> list[str]:
    """List every way ``series`` disagrees with ``manifest``; empty means a match."""
    problems = []
    if len(series) != manifest.series_count:
        problems.append(f"series count {len(series)} != {manifest.series_count}")
    grans = sorted({s.granularity_s for s in series})
    if grans and grans != [manifest.granularity_s]:
        problems.append(f"granularity {grans} != {manifest.granularity_s}s")
    if series:
        lengths = [len(s) for s in series]
        if min(lengths) != manifest.min_len:
            problems.append(f"min length {min(lengths)} != {manifest.min_len}")
        if max(lengths) != manifest.max_len:
            problems.append(f"max length {max(lengths)} != {manifest.max_len}")
    return problems


# ------------------------------------------------------------------ loaders


def _parse_timestamp(raw: str) -> int:
    raw = raw.strip()
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        f = float(raw)
    except ValueError:
        pass
    else:
        if math.isfinite(f) and f == int(f):
            return int(f)
        raise ValueError(f"non-integer timestamp {raw!r}")
    text = raw[:-1] + "+00:00" if raw.endswith("Z") else raw
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def _parse_value(raw: str) -> float:
    v = float(raw)
    if not math.isfinite(v):
        raise ValueError(f"non-finite value {raw!r}")
    return v


def _read_rows(path: Path, header: Sequence[str]) -> list[tuple[int, list[str]]]:
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            got = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if [h.strip() for h in got] != list(header):
            raise DataError(f"{path}: expected header {','.join(header)}, got {','.join(got)}")
        rows = []
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{reader.line_num}: expected {len(header)} fields, got {len(row)}")
            rows.append((reader.line_num, row))
    return rows


def _to_grid(ts: np.ndarray, granularity_s: int) -> np.ndarray:
    # Yahoo A1 stores the sample index (1, 2, ...) rather than epoch seconds.
    deltas = np.diff(ts)
    if granularity_s != 1 and len(deltas) and deltas.min() == 1:
        return ts * granularity_s
    return ts


def _build_series(name: str, path: Path, ts, values, labels, granularity_s: int) -> LabeledSeries:
    ts = np.asarray(ts, dtype=np.int64)
    if len(ts) > 1 and np.any(np.diff(ts) <= 0):
        row = int(np.flatnonzero(np.diff(ts) <= 0)[0]) + 3  # header + 1-based
        raise DataError(f"{path}:{row}: non-monotone timestamp")
    ts = _to_grid(ts, granularity_s)
    try:
        ts, values, labels, filled = repair_gaps(ts, values, labels, granularity_s, name=str(path))
        if filled:
            logger.info("%s: interpolated %d missing timestamps", path, filled)
        return LabeledSeries(id=name, granularity_s=granularity_s, timestamps=ts, values=values, labels=labels)
    except ValueError as exc:
        raise DataError(str(exc)) from exc


def load_yahoo_series(path: str | Path, granularity_s: int = YAHOO_GRANULARITY_S) -> LabeledSeries:
    path = Path(path)
    ts, values, labels = [], [], []
    for line, row in _read_rows(path, ("timestamp", "value", "is_anomaly")):
        try:
            ts.append(_parse_timestamp(row[0]))
            values.append(_parse_value(row[1]))
            lab = int(row[2])
            if lab not in (0, 1):
                raise ValueError(f"is_anomaly must be 0/1, got {row[2]!r}")
            labels.append(lab)
        except ValueError as exc:
            raise DataError(f"{path}:{line}: {exc}") from None
    return _build_series(path.stem, path, ts, values, labels, granularity_s)


def load_yahoo_a1(directory: str | Path, granularity_s: int = YAHOO_GRANULARITY_S) -> list[LabeledSeries]:
    """Load every ``*.csv`` in ``directory`` (header ``timestamp,value,is_anomaly``)."""
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(f"{directory}: not a directory")
    files = sorted(directory.glob("*.csv"))
    if not files:
        raise DataError(f"{directory}: no CSV files")
    return sorted((load_yahoo_series(f, granularity_s) for f in files), key=lambda s: s.id)


def _nab_label_index(labels_file: Path) -> dict[str, list[str]]:
    try:
        raw = json.loads(labels_file.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"{labels_file}: {exc}") from None
    if not isinstance(raw, dict):
        raise DataError(f"{labels_file}: expected a JSON object of file -> timestamps")
    index: dict[str, list[str]] = {}
    for key, stamps in raw.items():
        index.setdefault(Path(key).name, []).extend(stamps)
    return index


def load_nab_cloudwatch(
    csv_dir: str | Path, labels_file: str | Path, granularity_s: int = NAB_GRANULARITY_S
) -> list[LabeledSeries]:
    """Load NAB CSVs (``timestamp,value``) with ground-truth anomaly starts.

    ``labels_file`` is NAB's combined-labels JSON: relative file path ->
    list of timestamps. Keys are matched on the file name.
    """
    csv_dir, labels_file = Path(csv_dir), Path(labels_file)
    if not csv_dir.is_dir():
        raise DataError(f"{csv_dir}: not a directory")
    files = sorted(csv_dir.glob("*.csv"))
    if not files:
        raise DataError(f"{csv_dir}: no CSV files")
    index = _nab_label_index(labels_file)
    out = []
    for path in files:
        ts, values = [], []
        for line, row in _read_rows(path, ("timestamp", "value")):
            try:
                ts.append(_parse_timestamp(row[0]))
                values.append(_parse_value(row[1]))
            except ValueError as exc:
                raise DataError(f"{path}:{line}: {exc}") from None
        if path.name not in index:
            raise DataError(f"{labels_file}: no entry for series {path.name}")
        series = _build_series(path.stem, path, ts, values, np.zeros(len(ts), dtype=np.uint8), granularity_s)
        labels = np.zeros(len(series), dtype=np.uint8)
        for stamp in index[path.name]:
            try:
                t = _parse_timestamp(stamp)
            except ValueError:
                raise DataError(f"{labels_file}: bad timestamp {stamp!r} for series {path.stem}") from None
            pos = int(np.searchsorted(series.timestamps, t))
            if pos >= len(series) or series.timestamps[pos] != t:
                raise DataError(f"{labels_file}: timestamp {stamp} not in series {path.stem}")
            labels[pos] = 1
        out.append(
            LabeledSeries(
                id=series.id,
                granularity_s=granularity_s,
                timestamps=series.timestamps,
                values=series.values,
                labels=labels,
            )
        )
    return sorted(out, key=lambda s: s.id)


# ---------------------------------------------------------------- synthetic


@dataclass(frozen=True, slots=True)
class BaseShape:
    level: float = 0.0
    trend: float = 0.0
    season_amplitude: float = 0.0
    season_period: int = 24


@dataclass(frozen=True, slots=True)
class AnomalySpec:
    at: int
    kind: AnomalyKind = "spike"
    magnitude: float = 5.0  # multiples of noise_sigma


@dataclass(frozen=True, slots=True)
class DriftSpec:
    """A concept change applied from ``at`` onward.

    ``mean_shift`` adds ``magnitude`` to the level, ``variance_shift``
    multiplies the noise standard deviation by ``magnitude`` and
    ``period_change`` multiplies the season period by ``magnitude`` (phase
    stays continuous).
    """

    at: int
    kind: DriftKind = "mean_shift"
    magnitude: float = 1.0


@dataclass(frozen=True)
class SynthSpec:
    length: int
    granularity_s: int = 3600
    base: BaseShape = field(default_factory=BaseShape)
    noise_sigma: float = 1.0
    anomalies: tuple[AnomalySpec, ...] = ()
    drift: DriftSpec | None = None
    seed: int = 0
    id: str = "synthetic"

    def __post_init__(self) -> None:
        object.__setattr__(self, "anomalies", tuple(self.anomalies))
        if self.length < 2:
            raise ValueError("length must be >= 2")
        if self.granularity_s <= 0:
            raise ValueError("granularity_s must be positive")
        if self.noise_sigma < 0 or not math.isfinite(self.noise_sigma):
            raise ValueError("noise_sigma must be finite and >= 0")
        if self.base.season_amplitude != 0 and self.base.season_period < 2:
            raise ValueError("season_period must be >= 2 when season_amplitude != 0")
        seen = set()
        for a in self.anomalies:
            if not 0 <= a.at < self.length:
                raise ValueError(f"anomaly index {a.at} outside [0, {self.length})")
            if a.kind not in ("spike", "level_shift"):
                raise ValueError(f"unknown anomaly kind {a.kind!r}")
            if a.at in seen:
                raise ValueError(f"duplicate anomaly index {a.at}")
            seen.add(a.at)
        if self.drift is not None:
            if not 0 <= self.drift.at < self.length:
                raise ValueError(f"drift index {self.drift.at} outside [0, {self.length})")
            if self.drift.kind not in ("mean_shift", "variance_shift", "period_change"):
                raise ValueError(f"unknown drift kind {self.drift.kind!r}")
            if self.drift.kind == "period_change" and self.drift.magnitude <= 0:
                raise ValueError("period_change magnitude must be > 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SynthSpec":
        data = dict(data)
        base = BaseShape(**data.pop("base", {}))
        anomalies = tuple(AnomalySpec(**a) for a in data.pop("anomalies", ()))
        drift = data.pop("drift", None)
        return cls(base=base, anomalies=anomalies, drift=DriftSpec(**drift) if drift else None, **data)


def generate_synthetic(spec: SynthSpec) -> LabeledSeries:
    n = spec.length
    i = np.arange(n, dtype=np.float64)
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    noise = rng.standard_normal(n) * spec.noise_sigma

    base = spec.base
    level = np.full(n, base.level) + base.trend * i
    phase = 2 * np.pi * i / base.season_period if base.season_amplitude else np.zeros(n)
    drift = spec.drift
    if drift is not None:
        after = slice(drift.at, None)
        if drift.kind == "mean_shift":
            level[after] += drift.magnitude
        elif drift.kind == "variance_shift":
            noise[after] *= drift.magnitude
        elif base.season_amplitude:
            p = base.season_period
            phase[after] = 2 * np.pi * (drift.at / p + (i[after] - drift.at) / (p * drift.magnitude))
    values = level + base.season_amplitude * np.sin(phase) + noise

    labels = np.zeros(n, dtype=np.uint8)
    for a in spec.anomalies:
        bump = a.magnitude * spec.noise_sigma
        if a.kind == "spike":
            values[a.at] += bump
        else:
            values[a.at :] += bump
        labels[a.at] = 1
    ts = spec.granularity_s * np.arange(n, dtype=np.int64)
    return LabeledSeries(id=spec.id, granularity_s=spec.granularity_s, timestamps=ts, values=values, labels=labels)


def load_synth_specs(path: str | Path) -> list[SynthSpec]:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    items = raw if isinstance(raw, list) else [raw]
    return [SynthSpec.from_dict(item) for item in items]


def write_yahoo_csv(series: LabeledSeries, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["timestamp", "value", "is_anomaly"])
        for t, v, lab in zip(series.timestamps, series.values, series.labels):
            writer.writerow([int(t), repr(float(v)), int(lab)])


def write_nab_csv(series: LabeledSeries, path: str | Path) -> list[str]:
    """Write a NAB-style CSV; returns the labeled timestamps in NAB's format."""
    fmt = "%Y-%m-%d %H:%M:%S"
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["timestamp", "value"])
        for t, v in zip(series.timestamps, series.values):
            writer.writerow([datetime.fromtimestamp(int(t), tz=timezone.utc).strftime(fmt), repr(float(v))])
    return [
        datetime.fromtimestamp(int(t), tz=timezone.utc).strftime(fmt)
        for t in series.timestamps[series.labels == 1]
    ]
