from __future__ import annotations

import json

import numpy as np
import pytest

from driftbench.ingest import (
    NAB_CLOUDWATCH_MANIFEST,
    YAHOO_A1_MANIFEST,
    AnomalySpec,
    BaseShape,
    DataError,
    DatasetManifest,
    DriftSpec,
    SynthSpec,
    generate_synthetic,
    load_nab_cloudwatch,
    load_synth_specs,
    load_yahoo_a1,
    load_yahoo_series,
    validate_manifest,
    write_nab_csv,
    write_yahoo_csv,
)
from driftbench.series import LabeledSeries


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestYahoo:
    def test_index_timestamps_scaled(self, tmp_path):
        p = write(tmp_path / "real_1.csv", "timestamp,value,is_anomaly\n1,0.5,0\n2,0.7,1\n3,0.6,0\n")
        s = load_yahoo_series(p)
        assert s.id == "real_1"
        assert s.granularity_s == 3600
        assert s.timestamps.tolist() == [3600, 7200, 10800]
        assert s.labels.tolist() == [0, 1, 0]

    def test_epoch_timestamps_kept(self, tmp_path):
        p = write(tmp_path / "a.csv", "timestamp,value,is_anomaly\n1416722400,1,0\n1416726000,2,0\n")
        assert load_yahoo_series(p).timestamps.tolist() == [1416722400, 1416726000]

    def test_bad_value_names_line(self, tmp_path):
        p = write(tmp_path / "a.csv", "timestamp,value,is_anomaly\n1,0.5,0\n2,abc,0\n")
        with pytest.raises(DataError, match=r"a\.csv:3"):
            load_yahoo_series(p)

    def test_non_finite_rejected(self, tmp_path):
        p = write(tmp_path / "a.csv", "timestamp,value,is_anomaly\n1,0.5,0\n2,nan,0\n")
        with pytest.raises(DataError, match="non-finite"):
            load_yahoo_series(p)

    def test_non_monotone(self, tmp_path):
        p = write(tmp_path / "a.csv", "timestamp,value,is_anomaly\n1,0.5,0\n3,1,0\n2,1,0\n")
        with pytest.raises(DataError, match="non-monotone"):
            load_yahoo_series(p)

    def test_bad_header(self, tmp_path):
        p = write(tmp_path / "a.csv", "ts,value,label\n1,0.5,0\n")
        with pytest.raises(DataError, match="header"):
            load_yahoo_series(p)

    def test_directory_errors(self, tmp_path):
        with pytest.raises(DataError, match="not a directory"):
            load_yahoo_a1(tmp_path / "missing")
        with pytest.raises(DataError, match="no CSV"):
            load_yahoo_a1(tmp_path)

    def test_round_trip_with_writer(self, tmp_path):
        s = generate_synthetic(SynthSpec(length=50, seed=3, anomalies=(AnomalySpec(at=10),), id="syn"))
        write_yahoo_csv(s, tmp_path / "syn.csv")
        back = load_yahoo_a1(tmp_path)[0]
        assert back.id == "syn"
        assert np.array_equal(back.values, s.values)
        assert np.array_equal(back.labels, s.labels)
        assert np.array_equal(back.timestamps, s.timestamps)


class TestNab:
    def _corpus(self, tmp_path, n=2):
        d = tmp_path / "realAWSCloudwatch"
        d.mkdir()
        labels = {}
        for i in range(n):
            s = generate_synthetic(
                SynthSpec(length=40, granularity_s=300, seed=i, anomalies=(AnomalySpec(at=5 + i),), id=f"m{i}")
            )
            s = LabeledSeries(s.id, 300, s.timestamps + 1_400_000_000, s.values, s.labels)
            labels[f"realAWSCloudwatch/m{i}.csv"] = write_nab_csv(s, d / f"m{i}.csv")
        lf = write(tmp_path / "combined_labels.json", json.dumps(labels))
        return d, lf

    def test_loads_and_labels(self, tmp_path):
        d, lf = self._corpus(tmp_path)
        series = load_nab_cloudwatch(d, lf)
        assert [s.id for s in series] == ["m0", "m1"]
        assert np.flatnonzero(series[1].labels).tolist() == [6]
        assert series[0].granularity_s == 300

    def test_missing_label_entry(self, tmp_path):
        d, lf = self._corpus(tmp_path)
        write(lf, json.dumps({"realAWSCloudwatch/m0.csv": []}))
        with pytest.raises(DataError, match="no entry for series m1.csv"):
            load_nab_cloudwatch(d, lf)

    def test_unknown_label_timestamp(self, tmp_path):
        d, lf = self._corpus(tmp_path, n=1)
        write(lf, json.dumps({"realAWSCloudwatch/m0.csv": ["1999-01-01 00:00:00"]}))
        with pytest.raises(DataError, match="not in series"):
            load_nab_cloudwatch(d, lf)


class TestManifest:
    def test_constants(self):
        assert (YAHOO_A1_MANIFEST.series_count, YAHOO_A1_MANIFEST.granularity_s) == (67, 3600)
        assert (YAHOO_A1_MANIFEST.min_len, YAHOO_A1_MANIFEST.max_len) == (741, 1461)
        assert (NAB_CLOUDWATCH_MANIFEST.series_count, NAB_CLOUDWATCH_MANIFEST.granularity_s) == (17, 300)
        assert (NAB_CLOUDWATCH_MANIFEST.min_len, NAB_CLOUDWATCH_MANIFEST.max_len) == (1243, 4730)

    def test_mismatches_reported(self):
        m = DatasetManifest("toy", 2, 60, 10, 12)
        good = [LabeledSeries.from_values(np.zeros(n), id=str(n), granularity_s=60) for n in (10, 12)]
        assert validate_manifest(good, m) == []
        assert validate_manifest(good[:1], m) == ["series count 1 != 2", "max length 10 != 12"]


class TestSynthetic:
    def test_deterministic(self):
        spec = SynthSpec(length=200, base=BaseShape(level=3, season_amplitude=2), seed=42)
        a, b = generate_synthetic(spec), generate_synthetic(spec)
        assert np.array_equal(a.values, b.values)

    def test_noise_stream_is_pcg64_standard_normal(self):
        s = generate_synthetic(SynthSpec(length=64, noise_sigma=2.0, seed=9))
        expected = np.random.Generator(np.random.PCG64(9)).standard_normal(64) * 2.0
        assert np.array_equal(s.values, expected)

    def test_mean_shift_is_absolute(self):
        base = SynthSpec(length=100, seed=1)
        shifted = SynthSpec(length=100, seed=1, drift=DriftSpec(at=60, kind="mean_shift", magnitude=4.0))
        diff = generate_synthetic(shifted).values - generate_synthetic(base).values
        assert np.allclose(diff[:60], 0) and np.allclose(diff[60:], 4.0)

    def test_variance_shift_scales_noise(self):
        base = SynthSpec(length=100, seed=1, base=BaseShape(level=5))
        shifted = SynthSpec(length=100, seed=1, base=BaseShape(level=5), drift=DriftSpec(at=50, kind="variance_shift", magnitude=3.0))
        a, b = generate_synthetic(base).values - 5, generate_synthetic(shifted).values - 5
        assert np.allclose(b[:50], a[:50]) and np.allclose(b[50:], 3 * a[50:])

    def test_period_change_is_phase_continuous(self):
        spec = SynthSpec(
            length=200, noise_sigma=0, base=BaseShape(season_amplitude=1, season_period=20),
            drift=DriftSpec(at=100, kind="period_change", magnitude=2.0),
        )
        v = generate_synthetic(spec).values
        assert np.max(np.abs(np.diff(v))) < 2 * np.pi / 20 + 1e-9

    def test_anomalies_labeled_in_sigma_units(self):
        spec = SynthSpec(length=30, noise_sigma=2.0, seed=0, anomalies=(AnomalySpec(at=7, magnitude=5),))
        s = generate_synthetic(spec)
        clean = generate_synthetic(SynthSpec(length=30, noise_sigma=2.0, seed=0))
        assert np.flatnonzero(s.labels).tolist() == [7]
        assert s.values[7] - clean.values[7] == pytest.approx(10.0)

    def test_level_shift_anomaly_persists(self):
        spec = SynthSpec(length=30, noise_sigma=1.0, seed=0, anomalies=(AnomalySpec(at=20, kind="level_shift", magnitude=3),))
        clean = generate_synthetic(SynthSpec(length=30, noise_sigma=1.0, seed=0))
        assert np.allclose(generate_synthetic(spec).values[20:] - clean.values[20:], 3.0)

    @pytest.mark.parametrize(
        "kwargs, msg",
        [
            ({"length": 1}, "length"),
            ({"length": 10, "anomalies": (AnomalySpec(at=10),)}, "outside"),
            ({"length": 10, "drift": DriftSpec(at=3, kind="teleport")}, "unknown drift"),
            ({"length": 10, "seed": -1}, "seed"),
        ],
    )
    def test_validation(self, kwargs, msg):
        with pytest.raises(ValueError, match=msg):
            SynthSpec(**kwargs)

    def test_json_round_trip(self, tmp_path):
        spec = SynthSpec(
            length=80, base=BaseShape(level=1, trend=0.1), anomalies=(AnomalySpec(at=3),),
            drift=DriftSpec(at=40), seed=5, id="x",
        )
        p = write(tmp_path / "spec.json", json.dumps([spec.to_dict()]))
        assert load_synth_specs(p) == [spec]
