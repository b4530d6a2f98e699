"""Signal-reconstruction anomaly detectors: FFT residual, Spectral Residual, PCI.

All three share ``fit`` / ``classify``. Only FFT learns an absolute
threshold (the largest residual seen on anomaly-free training values); SR and
PCI decide with relative or analytic rules.
"""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, field
from typing import Any, Mapping, Union

import numpy as np
from scipy.ndimage import uniform_filter1d
from scipy.stats import norm

from .series import Batch, LabeledSeries, interpolate_flagged

EPS = 1e-8


class DetectorKind(str, enum.Enum):
    FFT = "FFT"
    SR = "SR"
    PCI = "PCI"


@dataclass(frozen=True, slots=True)
class FftParams:
    keep_components: int = 10

    def __post_init__(self) -> None:
        if self.keep_components < 1:
            raise ValueError("keep_components must be >= 1")

    @property
    def min_length(self) -> int:
        return 2 * self.keep_components


@dataclass(frozen=True, slots=True)
class SrParams:
    """Spectral Residual settings.

    q: width of the moving average over the log amplitude spectrum.
    m: number of trailing saliency values in the local mean.
    tau: relative saliency excess that marks an anomaly.
    context_len: training points kept and prepended at scoring time.
    """

    q: int = 3
    m: int = 21
    tau: float = 3.0
    context_len: int = 128

    def __post_init__(self) -> None:
        if self.q < 1 or self.m < 1:
            raise ValueError("q and m must be >= 1")
        if not self.tau > 0:
            raise ValueError("tau must be > 0")
        if self.context_len < 0:
            raise ValueError("context_len must be >= 0")

    @property
    def min_length(self) -> int:
        return self.q


@dataclass(frozen=True, slots=True)
class PciParams:
    k: int = 10
    alpha: float = 0.05

    def __post_init__(self) -> None:
        if self.k < 2 or self.k % 2:
            raise ValueError("k must be an even count >= 2")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must be in (0, 1)")

    @property
    def min_length(self) -> int:
        return self.k + 1


DetectorParams = Union[FftParams, SrParams, PciParams]
_PARAM_TYPES: dict[DetectorKind, type] = {
    DetectorKind.FFT: FftParams,
    DetectorKind.SR: SrParams,
    DetectorKind.PCI: PciParams,
}


def make_params(kind: DetectorKind | str, params: Mapping[str, Any] | None = None) -> DetectorParams:
    kind = DetectorKind(kind)
    cls = _PARAM_TYPES[kind]
    params = dict(params or {})
    unknown = set(params) - set(cls.__dataclass_fields__)
    if unknown:
        raise ValueError(f"unknown {kind.value} parameter(s): {', '.join(sorted(unknown))}")
    return cls(**params)


@dataclass(frozen=True, slots=True)
class DetectorSpec:
    kind: DetectorKind
    params: DetectorParams

    @classmethod
    def create(cls, kind: DetectorKind | str, params: Mapping[str, Any] | DetectorParams | None = None) -> "DetectorSpec":
        kind = DetectorKind(kind)
        if not isinstance(params, (FftParams, SrParams, PciParams)):
            params = make_params(kind, params)
        elif not isinstance(params, _PARAM_TYPES[kind]):
            raise TypeError(f"{type(params).__name__} does not fit detector {kind.value}")
        return cls(kind, params)

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "params": asdict(self.params)}


@dataclass(frozen=True, eq=False)
class FittedDetector:
    kind: DetectorKind
    params: DetectorParams
    threshold: float | None
    train_range: range
    context: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self) -> None:
        if len(self.train_range) == 0:
            raise ValueError("train_range must be non-empty")
        if self.kind is DetectorKind.FFT and (self.threshold is None or not np.isfinite(self.threshold)):
            raise ValueError("FFT detector needs a finite threshold")
        ctx = np.array(self.context, dtype=np.float64)
        ctx.setflags(write=False)
        object.__setattr__(self, "context", ctx)


# --------------------------------------------------------------------- FFT


def fft_reconstruct(values: np.ndarray, keep_components: int) -> np.ndarray:
    """Low-pass reconstruction keeping DC plus the lowest ``keep_components`` frequencies."""
    values = np.asarray(values, dtype=np.float64)
    spectrum = np.fft.rfft(values)
    spectrum[keep_components + 1 :] = 0
    return np.fft.irfft(spectrum, n=len(values))


def fft_score(values: np.ndarray, params: FftParams) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if len(values) < params.min_length:
        raise ValueError(f"FFT needs at least {params.min_length} points, got {len(values)}")
    return np.abs(values - fft_reconstruct(values, params.keep_components))


def calibrate_threshold(train_scores: np.ndarray) -> float:
    scores = np.asarray(train_scores, dtype=np.float64)
    if scores.size == 0:
        raise ValueError("cannot calibrate a threshold on empty scores")
    return float(scores.max())


# ---------------------------------------------------------------------- SR


def sr_saliency(values: np.ndarray, params: SrParams) -> np.ndarray:
    """Spectral Residual saliency map.

    The amplitude floor is relative to the strongest spectral line, and lines
    below it are dropped from the inverse transform: they carry no phase.
    """
    values = np.asarray(values, dtype=np.float64)
    if len(values) < params.q:
        raise ValueError(f"SR needs at least q={params.q} points, got {len(values)}")
    spectrum = np.fft.fft(values)
    amp = np.abs(spectrum)
    peak = amp.max()
    if peak == 0:
        return np.zeros(len(values))
    floor = EPS * peak
    live = amp > floor
    log_amp = np.log(np.maximum(amp, floor))
    residual = log_amp - uniform_filter1d(log_amp, size=params.q, mode="wrap")
    rebuilt = np.where(live, np.exp(residual + 1j * np.angle(spectrum)), 0)
    return np.abs(np.fft.ifft(rebuilt))


def trailing_mean(x: np.ndarray, m: int) -> np.ndarray:
    """Mean of the last ``m`` values up to and including each index."""
    c = np.cumsum(np.asarray(x, dtype=np.float64))
    out = c.copy()
    out[m:] = c[m:] - c[:-m]
    counts = np.minimum(np.arange(1, len(x) + 1), m)
    return out / counts


def sr_scores(values: np.ndarray, params: SrParams) -> np.ndarray:
    sal = sr_saliency(values, params)
    local = trailing_mean(sal, params.m)
    return (sal - local) / np.maximum(local, EPS)


def sr_detect(values: np.ndarray, params: SrParams) -> np.ndarray:
    return (sr_scores(values, params) > params.tau).astype(np.uint8)


# --------------------------------------------------------------------- PCI


def _neighbour_matrix(values: np.ndarray, k: int) -> np.ndarray:
    n = len(values)
    starts = np.clip(np.arange(n) - k // 2, 0, n - 1 - k)
    idx = starts[:, None] + np.arange(k + 1)
    keep = idx != np.arange(n)[:, None]
    return values[idx[keep].reshape(n, k)]


def pci_interval(values: np.ndarray, params: PciParams) -> tuple[np.ndarray, np.ndarray]:
    """Centre and half-width of each point's prediction interval."""
    values = np.asarray(values, dtype=np.float64)
    if len(values) < params.min_length:
        raise ValueError(f"PCI needs at least k+1={params.min_length} points, got {len(values)}")
    nb = _neighbour_matrix(values, params.k)
    centre = nb.mean(axis=1)
    spread = nb.std(axis=1, ddof=1)
    z = norm.ppf(1 - params.alpha / 2)
    return centre, z * spread * np.sqrt(1 + 1 / params.k)


def pci_detect(values: np.ndarray, params: PciParams) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    centre, half = pci_interval(values, params)
    return (np.abs(values - centre) > half).astype(np.uint8)


# ---------------------------------------------------------------- lifecycle


def fit(
    kind: DetectorKind | str,
    params: DetectorParams | Mapping[str, Any] | None,
    series: LabeledSeries,
    train_range: range,
    labels: np.ndarray | None = None,
) -> FittedDetector:
    """Fit on ``train_range`` after interpolating over labeled anomalies."""
    spec = DetectorSpec.create(kind, params)
    if train_range.step != 1 or train_range.start < 0 or train_range.stop > len(series) or not len(train_range):
        raise ValueError(f"train range [{train_range.start}, {train_range.stop}) invalid for {series.id}")
    lab = series.labels if labels is None else np.asarray(labels)
    clean = interpolate_flagged(
        series.values[train_range.start : train_range.stop], lab[train_range.start : train_range.stop]
    )
    threshold = None
    context = np.empty(0)
    if spec.kind is DetectorKind.FFT:
        threshold = calibrate_threshold(fft_score(clean, spec.params))
    elif spec.kind is DetectorKind.SR and spec.params.context_len:
        context = clean[-spec.params.context_len :]
    return FittedDetector(spec.kind, spec.params, threshold, train_range, context)


def classify(model: FittedDetector, series: LabeledSeries, batch: Batch | range) -> np.ndarray:
    start, end = (batch.start, batch.end) if isinstance(batch, Batch) else (batch.start, batch.stop)
    if start < 0 or end > len(series) or start >= end:
        raise ValueError(f"batch [{start}, {end}) outside series {series.id}")
    values = series.values[start:end]
    n = len(values)
    if model.kind is DetectorKind.FFT:
        _require(model, n)
        return (fft_score(values, model.params) > model.threshold).astype(np.uint8)
    if model.kind is DetectorKind.SR:
        joined = np.concatenate([model.context, values])
        _require(model, len(joined))
        return sr_detect(joined, model.params)[-n:]
    _require(model, n)
    return pci_detect(values, model.params)


def _require(model: FittedDetector, n: int) -> None:
    need = model.params.min_length
    if n < need:
        raise ValueError(f"{model.kind.value} detector needs batches of at least {need} points, got {n}")
