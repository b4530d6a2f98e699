from __future__ import annotations

import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import solve_toeplitz

from driftbench import fedd
from driftbench.fedd import (
    FEATURE_NAMES,
    DegenerateWindow,
    DriftStatus,
    EcddState,
    FeatureVector,
    FeddConfig,
    ecdd_update,
    ewma_closed_form,
    extract_features,
    feature_dissimilarity,
)
from driftbench.series import LabeledSeries, make_batches, split_half

RNG = np.random.default_rng(20240611)


def ar1(phi, n, seed):
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(n + 200)
    x = np.zeros_like(e)
    for t in range(1, len(e)):
        x[t] = phi * x[t - 1] + e[t]
    return x[200:]


def yule_walker_pacf(x, max_lag):
    """Last coefficient of the order-k Yule-Walker solution, for k = 1..max_lag."""
    rho = np.array([1.0] + [fedd.acf(x, k) for k in range(1, max_lag + 1)])
    return np.array([solve_toeplitz(rho[:k], rho[1 : k + 1])[-1] for k in range(1, max_lag + 1)])


class TestAcf:
    def test_alternating(self):
        x = np.tile([1.0, -1.0], 50)
        assert fedd.acf(x, 1) == pytest.approx(-1, abs=0.05)

    def test_white_noise(self):
        assert abs(fedd.acf(RNG.standard_normal(10_000), 1)) <= 0.05

    def test_constant(self):
        with pytest.raises(DegenerateWindow, match="degenerate window"):
            fedd.acf(np.full(50, 2.0), 1)

    def test_bad_lag(self):
        with pytest.raises(ValueError):
            fedd.acf(np.arange(5.0), 5)


class TestPacf:
    def test_ar1(self):
        p = fedd.pacf(ar1(0.8, 5000, 1), 5)
        assert p[0] == pytest.approx(0.8, abs=0.05)
        assert abs(p[1]) <= 0.05

    def test_first_equals_acf(self):
        x = ar1(0.5, 300, 2)
        assert fedd.pacf(x, 5)[0] == fedd.acf(x, 1)

    def test_white_noise(self):
        assert np.all(np.abs(fedd.pacf(RNG.standard_normal(10_000), 5)) <= 0.05)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10_000), phi=st.floats(-0.9, 0.9))
    def test_matches_yule_walker(self, seed, phi):
        x = ar1(phi, 400, seed)
        assert np.allclose(fedd.pacf(x, 5), yule_walker_pacf(x, 5), atol=1e-10)


class TestShapeFeatures:
    def test_turning_points(self):
        assert fedd.turning_point_rate(np.arange(20.0)) == 0
        assert fedd.turning_point_rate(np.tile([0.0, 1.0], 20)) == 1
        assert fedd.turning_point_rate(RNG.standard_normal(10_000)) == pytest.approx(2 / 3, abs=0.03)
        with pytest.raises(ValueError):
            fedd.turning_point_rate(np.array([1.0, 2.0]))

    def test_bicorrelation_direct(self):
        x = np.tile([2.0, -1.0, -1.0], 20) + 5.0
        xc = x - x.mean()
        s = math.sqrt(np.sum(xc**2) / (len(x) - 1))
        for lag in (1, 2, 3):
            n = len(x) - 2 * lag
            direct = sum(xc[t] * xc[t + lag] * xc[t + 2 * lag] for t in range(n)) / n / s**3
            assert fedd.bicorrelation(x, lag) == pytest.approx(direct, rel=1e-12)

    def test_bicorrelation_symmetric_noise(self):
        assert abs(fedd.bicorrelation(RNG.standard_normal(10_000), 1)) <= 0.1

    def test_bicorrelation_constant(self):
        with pytest.raises(DegenerateWindow):
            fedd.bicorrelation(np.ones(30), 1)

    def test_mi_independent(self):
        assert fedd.mutual_information(RNG.uniform(size=10_000), 1, 8) <= 0.02

    def test_mi_held_values_near_binned_entropy(self):
        levels = RNG.uniform(size=100)
        x = np.repeat(levels, 100)  # each value persists for 100 steps
        lo, hi = x.min(), x.max()
        cell = [min(int((v - lo) / (hi - lo) * 8), 7) for v in x]
        pairs = list(zip(cell[:-1], cell[1:]))
        n = len(pairs)
        joint, left, right = {}, {}, {}
        for a, b in pairs:
            joint[a, b] = joint.get((a, b), 0) + 1
            left[a] = left.get(a, 0) + 1
            right[b] = right.get(b, 0) + 1
        direct = sum(c / n * math.log(c * n / (left[a] * right[b])) for (a, b), c in joint.items())
        assert fedd.mutual_information(x, 1, 8) == pytest.approx(direct, abs=1e-9)
        p = np.bincount(cell) / len(cell)
        entropy = -np.sum(p[p > 0] * np.log(p[p > 0]))
        assert fedd.mutual_information(x, 1, 8) == pytest.approx(entropy, abs=0.1)

    def test_mi_symmetric(self):
        x = RNG.standard_normal(500).cumsum()
        assert fedd.mutual_information(x, 1) == pytest.approx(fedd.mutual_information(x[::-1], 1), abs=1e-12)

    def test_mi_degenerate(self):
        with pytest.raises(DegenerateWindow):
            fedd.mutual_information(np.ones(40))


class TestFeatureVector:
    def test_layout(self):
        v = extract_features(RNG.standard_normal(200))
        assert len(v.values) == len(FEATURE_NAMES) == 18
        assert FEATURE_NAMES[:2] == ("acf_1", "acf_2") and FEATURE_NAMES[-1] == "mutual_information_1"
        assert 0 <= v.to_dict()["turning_point_rate"] <= 1
        assert v.to_dict()["variance"] >= 0

    def test_round_trip(self):
        v = extract_features(RNG.standard_normal(100))
        assert FeatureVector.from_dict(v.to_dict()) == v

    def test_translation_invariance(self):
        x = RNG.standard_normal(300)
        a, b = extract_features(x).to_dict(), extract_features(x + 1000.0).to_dict()
        for name in FEATURE_NAMES:
            if name.startswith(("acf", "pacf", "turning", "bicorrelation", "variance")):
                assert a[name] == pytest.approx(b[name], rel=1e-7, abs=1e-9), name

    def test_errors(self):
        with pytest.raises(ValueError, match="at least 32"):
            extract_features(np.arange(10.0))
        with pytest.raises(DegenerateWindow, match="acf_1"):
            extract_features(np.ones(64))
        with pytest.raises(ValueError):
            FeatureVector((1.0,) * 17)

    def test_dissimilarity(self):
        a = np.array([1.0, 0.0, 2.0])
        assert feature_dissimilarity(a, a) == 0
        assert feature_dissimilarity(np.array([1.0, 0.0]), np.array([0.0, 3.0])) == pytest.approx(1)
        assert feature_dissimilarity(a, -a) == pytest.approx(2)
        with pytest.raises(ValueError):
            feature_dissimilarity(np.zeros(3), a)

    @given(
        st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3),
        st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3),
    )
    def test_dissimilarity_symmetric_bounded(self, a, b):
        a, b = np.array(a), np.array(b)
        if np.linalg.norm(a) < 1e-6 or np.linalg.norm(b) < 1e-6:
            return
        d = feature_dissimilarity(a, b)
        assert 0 <= d <= 2
        assert d == pytest.approx(feature_dissimilarity(b, a), abs=1e-12)
        assert feature_dissimilarity(a, a) == pytest.approx(0, abs=1e-12)


def simulate_chart(ds, lam=0.2, l_drift=3.0, burn_in=5):
    """Plain re-statement of the chart: returns the 1-based update index of the first drift."""
    z = None
    seen = []
    for t, d in enumerate(ds, start=1):
        z = d if z is None else (1 - lam) * z + lam * d
        if t > burn_in:
            mu = sum(seen) / len(seen)
            var = sum((s - mu) ** 2 for s in seen) / (len(seen) - 1)
            sigma = max(math.sqrt(var), 1e-9 * max(1.0, abs(mu)))
            sz = sigma * math.sqrt(lam / (2 - lam) * (1 - (1 - lam) ** (2 * t)))
            if z > mu + l_drift * sz:
                return t
        seen.append(d)
    return None


class TestEcdd:
    def run(self, ds, state=None):
        state = state or EcddState()
        statuses = []
        for d in ds:
            state, s = ecdd_update(state, d)
            statuses.append(s)
            if s is DriftStatus.DRIFT:
                break
        return state, statuses

    def test_constant_stream_stays_stable(self):
        _, statuses = self.run([0.3] * 200)
        assert set(statuses) == {DriftStatus.STABLE}

    def test_jump_detected_quickly(self):
        ds = list(0.05 + 0.005 * RNG.uniform(-1, 1, size=50)) + [0.5] * 10
        _, statuses = self.run(ds)
        assert statuses[-1] is DriftStatus.DRIFT
        assert 50 < len(statuses) <= 55
        assert simulate_chart(ds) == len(statuses)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(0, 2), min_size=6, max_size=60))
    def test_matches_independent_simulation(self, ds):
        _, statuses = self.run(ds)
        first = next((i + 1 for i, s in enumerate(statuses) if s is DriftStatus.DRIFT), None)
        assert first == simulate_chart(ds)

    def test_lambda_one_tracks_latest(self):
        state = EcddState(lam=1.0)
        for d in (0.1, 0.4, 0.2):
            state, _ = ecdd_update(state, d)
        assert state.z == 0.2

    @given(st.lists(st.floats(0, 2), min_size=2, max_size=50), st.floats(0.01, 1.0))
    def test_closed_form(self, ds, lam):
        state = EcddState(lam=lam, burn_in=10**6)
        for d in ds:
            state, _ = ecdd_update(state, d)
        assert state.z == pytest.approx(ewma_closed_form(ds[1:], lam, ds[0]), abs=1e-9)

    def test_running_moments(self):
        ds = RNG.uniform(size=30)
        state = EcddState(burn_in=100)
        for d in ds:
            state, _ = ecdd_update(state, d)
        assert state.mu0 == pytest.approx(ds.mean())
        assert state.var0 == pytest.approx(ds.var(ddof=1))

    def test_update_after_drift_requires_reset(self):
        ds = [0.05, 0.06, 0.05, 0.04, 0.05, 0.06, 0.05, 5.0]
        state, statuses = self.run(ds)
        assert statuses[-1] is DriftStatus.DRIFT
        with pytest.raises(RuntimeError, match="reset"):
            ecdd_update(state, 0.1)
        assert state.reset().t == 0

    def test_no_signal_during_burn_in(self):
        _, statuses = self.run([0.0, 0.0, 0.0, 0.0, 10.0])
        assert statuses == [DriftStatus.STABLE] * 5

    def test_invalid_input(self):
        with pytest.raises(ValueError):
            ecdd_update(EcddState(), -0.1)
        with pytest.raises(ValueError):
            ecdd_update(EcddState(), float("nan"))
        with pytest.raises(ValueError):
            EcddState(lam=0)

    def test_mean_uncertainty_widens_limit(self):
        plain, wide = EcddState(burn_in=1), EcddState(burn_in=1, mean_uncertainty=True)
        for d in (0.1, 0.2, 0.15, 0.12):
            plain, _ = ecdd_update(plain, d, observe_only=True)
            wide, _ = ecdd_update(wide, d, observe_only=True)
        assert wide.sigma_z() ** 2 == pytest.approx(plain.sigma_z() ** 2 + wide.var0 / wide.t)


def seasonal_series(n, seed, shift_at=None, shift=0.0):
    rng = np.random.default_rng(seed)
    x = 10 + 5 * np.sin(2 * np.pi * np.arange(n) / 24) + rng.standard_normal(n)
    if shift_at is not None:
        x[shift_at:] += shift
    return LabeledSeries.from_values(x, id=f"s{seed}")


class TestMonitor:
    def test_one_signal_per_batch_in_order(self):
        s = seasonal_series(2 * 9 * 168, 1)
        train, test = split_half(s)
        batches = make_batches(test, 168)
        sig = fedd.fedd_monitor(s, train, batches)
        assert [x.batch_index for x in sig] == list(range(9))
        assert all(x.series_id == "s1" for x in sig)

    def test_repeated_training_data_is_stable(self):
        base = seasonal_series(1512, 2).values
        s = LabeledSeries.from_values(np.concatenate([base, base]), id="rep")
        train, test = split_half(s)
        sig = fedd.fedd_monitor(s, train, make_batches(test, 168))
        assert all(x.status is DriftStatus.STABLE for x in sig)

    def test_mean_shift_detected(self):
        n = 2 * 9 * 168
        s = seasonal_series(n, 3, shift_at=n // 2 + 3 * 168 + 84, shift=5.0)
        train, test = split_half(s)
        sig = fedd.fedd_monitor(s, train, make_batches(test, 168))
        assert sig[3].status is DriftStatus.DRIFT

    def test_degenerate_batch_is_stable_and_logged(self, caplog):
        x = seasonal_series(2 * 3 * 168, 4).values.copy()
        x[-168:] = 1.0
        s = LabeledSeries.from_values(x, id="flat")
        train, test = split_half(s)
        with caplog.at_level(logging.WARNING, logger="driftbench.fedd"):
            sig = fedd.fedd_monitor(s, train, make_batches(test, 168))
        assert sig[-1].status is DriftStatus.STABLE and sig[-1].dissimilarity is None
        assert "flat batch 2" in caplog.text

    def test_reanchor_after_drift(self):
        n = 2 * 9 * 168
        s = seasonal_series(n, 5, shift_at=n // 2 + 168 + 84, shift=8.0)
        train, test = split_half(s)
        batches = make_batches(test, 168)
        sig = fedd.fedd_monitor(s, train, batches)
        first = next(x.batch_index for x in sig if x.status is DriftStatus.DRIFT)
        # The post-change level becomes the reference, so it does not keep alarming.
        assert all(x.status is not DriftStatus.DRIFT for x in sig[first + 2 :])

    def test_empty(self):
        s = seasonal_series(400, 0)
        assert fedd.fedd_monitor(s, range(0, 200), []) == []

    def test_config_validation(self):
        with pytest.raises(ValueError):
            FeddConfig(reference_stride=-1)
        with pytest.raises(ValueError):
            FeddConfig(lam=2.0)
