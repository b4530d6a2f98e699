from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from driftbench.series import (
    AnomalySegment,
    Batch,
    LabeledSeries,
    SplitSpec,
    interpolate_flagged,
    labels_from_segments,
    make_batches,
    remove_anomalies_interpolate,
    repair_gaps,
    segments_from_labels,
    split_half,
)

bits = st.lists(st.integers(0, 1), min_size=0, max_size=80)


def make(values, labels=None):
    return LabeledSeries.from_values(np.asarray(values, dtype=float), labels, id="s")


class TestLabeledSeries:
    def test_rejects_nan(self):
        with pytest.raises(ValueError, match="finite"):
            make([1.0, np.nan, 2.0])

    def test_rejects_uneven_grid(self):
        with pytest.raises(ValueError, match="granularity"):
            LabeledSeries("s", 60, np.array([0, 60, 180]), np.zeros(3), np.zeros(3, dtype=np.uint8))

    def test_rejects_bad_labels(self):
        with pytest.raises(ValueError, match="0/1"):
            make([1.0, 2.0], [0, 2])

    def test_needs_two_points(self):
        with pytest.raises(ValueError):
            make([1.0])

    def test_arrays_read_only(self):
        s = make([1.0, 2.0, 3.0])
        with pytest.raises(ValueError):
            s.values[0] = 5.0

    def test_points(self):
        s = LabeledSeries.from_values([4.0, 5.0], id="x", granularity_s=60, start=120)
        assert [(p.timestamp, p.value) for p in s.points] == [(120, 4.0), (180, 5.0)]


class TestSplit:
    @pytest.mark.parametrize(
        "n, train, test",
        [(10, range(0, 5), range(5, 10)), (11, range(0, 5), range(5, 11)), (1441, range(0, 720), range(720, 1441))],
    )
    def test_examples(self, n, train, test):
        assert split_half(n) == (train, test)

    def test_too_short(self):
        with pytest.raises(ValueError, match="series too short to split"):
            split_half(make([1.0, 2.0, 3.0]))

    def test_split_spec(self):
        with pytest.raises(ValueError):
            SplitSpec(train_len=10, batch_len=1)


class TestBatches:
    def test_exact_tiling(self):
        b = make_batches(range(720, 1056), 168)
        assert [(x.start, x.end) for x in b] == [(720, 888), (888, 1056)]

    def test_short_remainder(self):
        assert [len(x) for x in make_batches(range(0, 500), 168)] == [168, 168, 164]

    def test_merge_single_remainder(self):
        assert [len(x) for x in make_batches(range(0, 169), 168)] == [169]

    def test_errors(self):
        with pytest.raises(ValueError):
            make_batches(range(0, 0), 10)
        with pytest.raises(ValueError):
            make_batches(range(0, 10), 1)
        with pytest.raises(ValueError):
            Batch(0, 5, 5)

    @given(n=st.integers(4, 3000), batch_len=st.integers(2, 400))
    def test_split_then_batches_partition(self, n, batch_len):
        train, test = split_half(n)
        covered = list(train)
        for i, b in enumerate(make_batches(test, batch_len)):
            assert b.index == i
            assert len(b) >= 2
            covered.extend(b.range)
        assert covered == list(range(n))


class TestSegments:
    def test_two_segments_of_three(self):
        segs = segments_from_labels([0, 1, 1, 1, 0, 0, 1, 1, 1, 0])
        assert segs == [AnomalySegment(1, 3), AnomalySegment(6, 8)]

    def test_empty_and_singletons(self):
        assert segments_from_labels([0, 0, 0]) == []
        assert segments_from_labels([1, 0, 1]) == [AnomalySegment(0, 0), AnomalySegment(2, 2)]

    @given(bits)
    def test_round_trip_and_lengths(self, labels):
        segs = segments_from_labels(labels)
        assert labels_from_segments(segs, len(labels)).tolist() == labels
        assert sum(len(s) for s in segs) == sum(labels)
        for a, b in zip(segs, segs[1:]):
            assert a.end + 1 < b.start  # maximal: separated by at least one zero


class TestInterpolation:
    @pytest.mark.parametrize(
        "values, labels, expected",
        [([1, 9, 3], [0, 1, 0], [1, 2, 3]), ([5, 100, 100, 5], [0, 1, 1, 0], [5, 5, 5, 5]), ([7, 7], [1, 0], [7, 7])],
    )
    def test_examples(self, values, labels, expected):
        s = make(values, labels)
        assert remove_anomalies_interpolate(s, range(len(s))).tolist() == expected

    def test_no_clean_data(self):
        with pytest.raises(ValueError, match="no clean data"):
            interpolate_flagged(np.array([1.0, 2.0]), np.array([1, 1]))

    def test_range_respected(self):
        s = make([0.0, 10.0, 99.0, 30.0, 40.0], [0, 0, 1, 0, 0])
        assert remove_anomalies_interpolate(s, range(1, 4)).tolist() == [10.0, 20.0, 30.0]
        # Outside neighbours are not used: a range starting at the anomaly extends the next clean value.
        assert remove_anomalies_interpolate(s, range(2, 4)).tolist() == [30.0, 30.0]

    @settings(max_examples=200)
    @given(st.lists(st.tuples(st.floats(-1e6, 1e6), st.integers(0, 1)), min_size=1, max_size=60))
    def test_idempotent(self, pairs):
        values = np.array([v for v, _ in pairs])
        flags = np.array([f for _, f in pairs])
        if flags.all():
            return
        once = interpolate_flagged(values, flags)
        assert np.array_equal(interpolate_flagged(once, np.zeros_like(flags)), once)
        assert np.array_equal(once[flags == 0], values[flags == 0])


class TestGapRepair:
    def test_fills_linearly(self):
        ts = np.array([0, 60, 180, 240] + [300 + 60 * i for i in range(30)])
        vals = np.arange(len(ts), dtype=float)
        vals[2:] += 1  # index gap: value at 120 should be the midpoint of 1 and 3
        grid, filled, lab, missing = repair_gaps(ts, vals, np.zeros(len(ts), dtype=np.uint8), 60)
        assert missing == 1
        assert np.all(np.diff(grid) == 60)
        assert filled[2] == pytest.approx(2.0)
        assert lab[2] == 0

    def test_cap(self):
        ts = np.array([0, 60, 600])
        with pytest.raises(ValueError, match="repair cap"):
            repair_gaps(ts, np.zeros(3), np.zeros(3, dtype=np.uint8), 60)

    def test_off_grid(self):
        with pytest.raises(ValueError, match="grid"):
            repair_gaps(np.array([0, 61]), np.zeros(2), np.zeros(2, dtype=np.uint8), 60)
