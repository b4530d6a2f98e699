"""Seeded synthetic corpora used by the behavioural checks and the ``synth`` command.

Every builder returns ``SynthSpec`` lists, so a corpus can be written to JSON
and regenerated bit-for-bit from it.
"""

from __future__ import annotations

import numpy as np

from .ingest import AnomalySpec, BaseShape, DriftSpec, SynthSpec, generate_synthetic
from .series import LabeledSeries

WEEK = 168  # hourly points per batch
SEASON = 24


def series_seed(base_seed: int, index: int) -> int:
    """Independent 64-bit seed for series ``index`` of a corpus."""
    return int(np.random.SeedSequence([base_seed, index]).generate_state(1, np.uint64)[0])


# ------------------------------------------------------------ drift monitor

DRIFT_BATCHES = 9
DRIFT_SHIFT_BATCH = 3
DRIFT_SHIFT_SIGMA = 5.0


def drift_monitor_specs(
    n_series: int = 20,
    *,
    shifted: bool = False,
    base_seed: int = 7,
    batch_len: int = WEEK,
    n_batches: int = DRIFT_BATCHES,
) -> list[SynthSpec]:
    """Seasonal series whose test half spans ``n_batches`` batches.

    With ``shifted`` the level jumps by five noise standard deviations in the
    middle of batch 3. A jump exactly on a batch boundary would leave every
    batch internally homogeneous, and all 18 monitor features ignore a
    constant offset, so the change would be invisible by construction.
    """
    half = n_batches * batch_len
    at = half + DRIFT_SHIFT_BATCH * batch_len + batch_len // 2
    specs = []
    for i in range(n_series):
        drift = DriftSpec(at=at, kind="mean_shift", magnitude=DRIFT_SHIFT_SIGMA) if shifted else None
        specs.append(
            SynthSpec(
                length=2 * half,
                base=BaseShape(level=10.0, season_amplitude=5.0, season_period=SEASON),
                noise_sigma=1.0,
                drift=drift,
                seed=series_seed(base_seed, i),
                id=f"{'shift' if shifted else 'stationary'}-{i:02d}",
            )
        )
    return specs


# ------------------------------------------------------ maintenance regimes

MAINT_LENGTH = 1440
MAINT_STEP_AT = 100
MAINT_STEP = 30.0
MAINT_SPIKES = 20
MAINT_SPIKE_SIGMA = 10.0
MAINT_SEASON = 2.0


def maintenance_specs(
    n_series: int = 30,
    *,
    drift: bool = True,
    base_seed: int = 11,
    length: int = MAINT_LENGTH,
    step_at: int = MAINT_STEP_AT,
    step: float = MAINT_STEP,
    n_spikes: int = MAINT_SPIKES,
    spike_sigma: float = MAINT_SPIKE_SIGMA,
) -> list[SynthSpec]:
    """Seasonal series with labeled spikes in the test half.

    The drift variant carries a large level step early in the training half.
    A model that keeps that step in its training data learns an inflated
    residual threshold; one that retrains on recent data only forgets it.
    The stationary variant is identical apart from the step.
    """
    half = length // 2
    specs = []
    for i in range(n_series):
        seed = series_seed(base_seed, i)
        rng = np.random.default_rng(seed ^ 0x5EED)
        # Spikes sit away from batch edges and each other.
        slots = rng.choice(np.arange(half + 2, length - 2, 3), size=n_spikes, replace=False)
        anomalies = tuple(AnomalySpec(at=int(a), kind="spike", magnitude=spike_sigma) for a in np.sort(slots))
        specs.append(
            SynthSpec(
                length=length,
                base=BaseShape(level=50.0, season_amplitude=MAINT_SEASON, season_period=SEASON),
                noise_sigma=1.0,
                anomalies=anomalies,
                drift=DriftSpec(at=step_at, kind="mean_shift", magnitude=step) if drift else None,
                seed=seed,
                id=f"{'drift' if drift else 'stationary'}-{i:02d}",
            )
        )
    return specs


def build(specs: list[SynthSpec]) -> list[LabeledSeries]:
    return [generate_synthetic(s) for s in specs]
