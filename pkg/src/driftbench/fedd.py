"""Feature-based drift detection (FEDD) with an EWMA control chart (ECDD).

Each window is summarised by 18 features; the cosine distance between the
current window's features and a reference vector is charted with an EWMA.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .series import Batch, LabeledSeries

logger = logging.getLogger(__name__)

# Feature layout. Changing any of these changes the vector dimension/order.
ACF_LAGS = (1, 2, 3, 4, 5)
PACF_MAX_LAG = 5
BICORR_LAGS = (1, 2, 3)
MI_LAG = 1
MI_BINS = 8
MIN_WINDOW = 32

FEATURE_NAMES: tuple[str, ...] = (
    *(f"acf_{k}" for k in ACF_LAGS),
    *(f"pacf_{k}" for k in range(1, PACF_MAX_LAG + 1)),
    "variance",
    "skewness",
    "excess_kurtosis",
    "turning_point_rate",
    *(f"bicorrelation_{k}" for k in BICORR_LAGS),
    f"mutual_information_{MI_LAG}",
)


class DegenerateWindow(ValueError):
    pass


def _centered(x: np.ndarray) -> tuple[np.ndarray, float]:
    x = np.asarray(x, dtype=np.float64)
    xc = x - x.mean()
    ss = float(np.dot(xc, xc))
    if ss == 0.0 or ss <= 1e-24 * max(1.0, float(np.dot(x, x))):
        raise DegenerateWindow("degenerate window")
    return xc, ss


def acf(x: np.ndarray, lag: int) -> float:
    if lag < 1 or len(x) <= lag:
        raise ValueError(f"acf needs 1 <= lag < length, got lag={lag}, length={len(x)}")
    xc, ss = _centered(x)
    return float(np.clip(np.dot(xc[:-lag], xc[lag:]) / ss, -1.0, 1.0))


def pacf(x: np.ndarray, max_lag: int) -> np.ndarray:
    """Partial autocorrelations at lags 1..max_lag (Durbin-Levinson)."""
    if max_lag < 1 or len(x) <= max_lag:
        raise ValueError(f"pacf needs 1 <= max_lag < length, got {max_lag}, length={len(x)}")
    rho = np.array([1.0] + [acf(x, k) for k in range(1, max_lag + 1)])
    out = np.zeros(max_lag)
    phi = np.zeros(max_lag + 1)
    out[0] = phi[1] = rho[1]
    for k in range(2, max_lag + 1):
        num = rho[k] - np.dot(phi[1:k], rho[k - 1 : 0 : -1])
        den = 1.0 - np.dot(phi[1:k], rho[1:k])
        pk = num / den if abs(den) > 1e-12 else 0.0
        new = phi.copy()
        new[1:k] = phi[1:k] - pk * phi[k - 1 : 0 : -1]
        new[k] = pk
        phi = new
        out[k - 1] = np.clip(pk, -1.0, 1.0)
    return out


def turning_point_rate(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    if len(x) < 3:
        raise ValueError("turning point rate needs at least 3 points")
    mid, left, right = x[1:-1], x[:-2], x[2:]
    turns = ((mid > left) & (mid > right)) | ((mid < left) & (mid < right))
    return float(turns.sum() / (len(x) - 2))


def bicorrelation(x: np.ndarray, lag: int) -> float:
    if lag < 1 or len(x) <= 2 * lag:
        raise ValueError(f"bicorrelation needs length > 2*lag, got lag={lag}, length={len(x)}")
    xc, ss = _centered(x)
    s = math.sqrt(ss / (len(xc) - 1))
    n = len(xc) - 2 * lag
    triple = xc[:n] * xc[lag : lag + n] * xc[2 * lag :]
    return float(triple.mean() / s**3)


def mutual_information(x: np.ndarray, lag: int = MI_LAG, bins: int = MI_BINS) -> float:
    """Plug-in MI (nats) of ``(x_t, x_{t+lag})`` on an equal-width grid over the window range."""
    x = np.asarray(x, dtype=np.float64)
    if lag < 1 or len(x) <= lag:
        raise ValueError(f"mutual information needs 1 <= lag < length, got lag={lag}")
    if bins < 2:
        raise ValueError("bins must be >= 2")
    lo, hi = float(x.min()), float(x.max())
    if hi <= lo:
        raise DegenerateWindow("degenerate window")
    edges = np.linspace(lo, hi, bins + 1)
    joint, _, _ = np.histogram2d(x[:-lag], x[lag:], bins=[edges, edges])
    p = joint / joint.sum()
    px, py = p.sum(axis=1), p.sum(axis=0)
    nz = p > 0
    mi = float(np.sum(p[nz] * np.log(p[nz] / np.outer(px, py)[nz])))
    return max(mi, 0.0)


def _moments(x: np.ndarray) -> tuple[float, float, float]:
    xc, ss = _centered(x)
    n = len(xc)
    m2 = ss / n
    skew = float(np.mean(xc**3) / m2**1.5)
    kurt = float(np.mean(xc**4) / m2**2 - 3.0)
    return ss / (n - 1), skew, kurt


@dataclass(frozen=True, slots=True)
class FeatureVector:
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        vals = tuple(float(v) for v in self.values)
        if len(vals) != len(FEATURE_NAMES):
            raise ValueError(f"feature vector needs {len(FEATURE_NAMES)} entries, got {len(vals)}")
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("feature vector entries must be finite")
        object.__setattr__(self, "values", vals)

    def as_array(self) -> np.ndarray:
        return np.array(self.values)

    def to_dict(self) -> dict[str, float]:
        return dict(zip(FEATURE_NAMES, self.values))

    @classmethod
    def from_dict(cls, data: dict[str, float]) -> "FeatureVector":
        return cls(tuple(data[name] for name in FEATURE_NAMES))


def extract_features(x: np.ndarray) -> FeatureVector:
    x = np.asarray(x, dtype=np.float64)
    if len(x) < MIN_WINDOW:
        raise ValueError(f"feature window needs at least {MIN_WINDOW} points, got {len(x)}")
    out: list[float] = []

    def add(name, fn):
        try:
            val = fn()
        except ValueError as exc:
            raise type(exc)(f"{name}: {exc}") from exc
        out.extend(np.atleast_1d(val).tolist())

    for k in ACF_LAGS:
        add(f"acf_{k}", lambda k=k: acf(x, k))
    add("pacf", lambda: pacf(x, PACF_MAX_LAG))
    add("moments", lambda: _moments(x))
    add("turning_point_rate", lambda: turning_point_rate(x))
    for k in BICORR_LAGS:
        add(f"bicorrelation_{k}", lambda k=k: bicorrelation(x, k))
    add("mutual_information", lambda: mutual_information(x, MI_LAG, MI_BINS))
    return FeatureVector(tuple(out))


def feature_dissimilarity(ref: FeatureVector | np.ndarray, cur: FeatureVector | np.ndarray) -> float:
    """Cosine distance in [0, 2]."""
    a = ref.as_array() if isinstance(ref, FeatureVector) else np.asarray(ref, dtype=np.float64)
    b = cur.as_array() if isinstance(cur, FeatureVector) else np.asarray(cur, dtype=np.float64)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("feature vectors must be finite")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("zero-norm feature vector")
    if np.array_equal(a, b):
        return 0.0
    return float(np.clip(1.0 - np.dot(a, b) / (na * nb), 0.0, 2.0))


# -------------------------------------------------------------------- ECDD


class DriftStatus(str, enum.Enum):
    STABLE = "stable"
    WARNING = "warning"
    DRIFT = "drift"


@dataclass(frozen=True, slots=True)
class EcddState:
    """EWMA control chart over a dissimilarity stream.

    ``mu0``/``var0`` are the running mean and sample variance of all values
    seen *before* the current one; the chart compares ``z`` against them.
    No signal is raised during the first ``burn_in`` updates.

    With ``mean_uncertainty`` the limit also covers the error of ``mu0``
    itself (``var0 / t``), which matters when the chart was warmed up on a
    handful of reference windows.
    """

    lam: float = 0.2
    l_warn: float = 2.0
    l_drift: float = 3.0
    burn_in: int = 5
    t: int = 0
    z: float | None = None
    mu0: float = 0.0
    m2: float = 0.0
    status: DriftStatus = DriftStatus.STABLE
    mean_uncertainty: bool = False

    def __post_init__(self) -> None:
        if not 0 < self.lam <= 1:
            raise ValueError("lambda must be in (0, 1]")
        if not (self.l_warn > 0 and self.l_drift > 0):
            raise ValueError("control-limit multipliers must be positive")
        if self.burn_in < 1:
            raise ValueError("burn_in must be >= 1")

    @property
    def var0(self) -> float:
        return self.m2 / (self.t - 1) if self.t > 1 else 0.0

    def reset(self) -> "EcddState":
        return EcddState(self.lam, self.l_warn, self.l_drift, self.burn_in, mean_uncertainty=self.mean_uncertainty)

    def sigma_z(self, t: int | None = None) -> float:
        t = self.t if t is None else t
        sigma = max(math.sqrt(self.var0), 1e-9 * max(1.0, abs(self.mu0)))
        lam = self.lam
        ewma = lam / (2 - lam) * (1 - (1 - lam) ** (2 * t))
        if self.mean_uncertainty and self.t > 0:
            ewma += 1 / self.t
        return sigma * math.sqrt(ewma)


def ecdd_update(state: EcddState, d: float, *, observe_only: bool = False) -> tuple[EcddState, DriftStatus]:
    """Push one dissimilarity through the chart.

    ``observe_only`` updates the statistics without raising a signal (used to
    warm the chart up on reference data).
    """
    if state.status is DriftStatus.DRIFT:
        raise RuntimeError("ECDD state signalled drift; reset it before further updates")
    if not math.isfinite(d) or d < 0:
        raise ValueError(f"dissimilarity must be finite and >= 0, got {d}")
    t = state.t + 1
    z = d if state.z is None else (1 - state.lam) * state.z + state.lam * d

    status = DriftStatus.STABLE
    if not observe_only and t > state.burn_in:
        sz = state.sigma_z(t)
        if z > state.mu0 + state.l_drift * sz:
            status = DriftStatus.DRIFT
        elif z > state.mu0 + state.l_warn * sz:
            status = DriftStatus.WARNING

    delta = d - state.mu0
    mu0 = state.mu0 + delta / t
    m2 = state.m2 + delta * (d - mu0)
    return replace(state, t=t, z=z, mu0=mu0, m2=m2, status=status), status


def ewma_closed_form(ds: Sequence[float], lam: float, z0: float) -> float:
    t = len(ds)
    return sum(lam * (1 - lam) ** (t - i) * d for i, d in enumerate(ds, start=1)) + (1 - lam) ** t * z0


# ----------------------------------------------------------------- monitor


@dataclass(frozen=True, slots=True)
class FeddConfig:
    lam: float = 0.2
    l_warn: float = 2.0
    l_drift: float = 3.0
    burn_in: int = 5
    # Warm-up windows are batch-length slices of the reference region taken
    # every ``reference_stride`` points; stride 0 means one batch length
    # (non-overlapping, so each warm-up value counts as one sample).
    reference_stride: int = 0
    reanchor_on_drift: bool = True
    mean_uncertainty: bool = True

    def __post_init__(self) -> None:
        if self.reference_stride < 0:
            raise ValueError("reference_stride must be >= 0")
        self.fresh_state()  # validates the chart constants

    def fresh_state(self) -> EcddState:
        return EcddState(self.lam, self.l_warn, self.l_drift, self.burn_in, mean_uncertainty=self.mean_uncertainty)


@dataclass(frozen=True, slots=True)
class DriftSignal:
    series_id: str
    batch_index: int
    status: DriftStatus
    dissimilarity: float | None = None


def _warm_windows(region: np.ndarray, width: int, stride: int) -> Iterable[tuple[np.ndarray, np.ndarray]]:
    """Yield ``(window, rest)`` pairs: each window and the region without it."""
    for start in range(0, len(region) - width + 1, stride):
        rest = np.concatenate([region[:start], region[start + width :]])
        if len(rest) >= MIN_WINDOW:
            yield region[start : start + width], rest


def _anchor(region: np.ndarray, width: int, stride: int, config: FeddConfig) -> tuple[FeatureVector, EcddState]:
    """Reference features of ``region`` plus a chart warmed up on it.

    Each warm-up dissimilarity compares a window with the region minus that
    window, so the chart learns what an out-of-sample batch looks like rather
    than the smaller in-sample distance.
    """
    ref = extract_features(region)
    state = config.fresh_state()
    for win, rest in _warm_windows(region, width, stride):
        try:
            d = feature_dissimilarity(extract_features(rest), extract_features(win))
        except ValueError:
            continue
        state, _ = ecdd_update(state, d, observe_only=True)
    return ref, state


def fedd_monitor(
    series: LabeledSeries,
    train_range: range,
    batches: Sequence[Batch],
    config: FeddConfig | None = None,
) -> list[DriftSignal]:
    """One drift signal per batch, in batch order.

    The reference vector comes from ``train_range``; the chart is warmed up
    on batch-length slices of that range (see ``_anchor``). After a drift the reference region
    becomes the ``len(train_range)`` points ending with the drift batch.
    """
    config = config or FeddConfig()
    if not batches:
        return []
    values = series.values
    ref_len = len(train_range)
    width = len(batches[0])
    stride = config.reference_stride or width
    warm_region = values[train_range.start : train_range.stop]
    ref, state = _anchor(warm_region, width, stride, config)

    signals = []
    for batch in batches:
        try:
            d = feature_dissimilarity(ref, extract_features(values[batch.start : batch.end]))
        except ValueError as exc:
            logger.warning("%s batch %d: %s; reporting stable", series.id, batch.index, exc)
            signals.append(DriftSignal(series.id, batch.index, DriftStatus.STABLE))
            continue
        state, status = ecdd_update(state, d)
        signals.append(DriftSignal(series.id, batch.index, status, d))
        if status is DriftStatus.DRIFT:
            if config.reanchor_on_drift:
                warm_region = values[max(train_range.start, batch.end - ref_len) : batch.end]
                ref, state = _anchor(warm_region, width, stride, config)
            else:
                _, state = _anchor(warm_region, width, stride, config)
    return signals
