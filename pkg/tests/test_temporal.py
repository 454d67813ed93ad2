import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grasptax.errors import EvenWindow, MissingTaskIds
from grasptax.temporal import (STABLE, TRANSITORY, InteractionSegment, extract_interactions, group_by_task,
                               interval_sample, label_phases, median_filter_binary, read_segment_table,
                               sample_interactions, uniform_task_sample, write_segment_table)


def naive_median(signal, window):
    """Sliding median with a shrinking edge window; an even window that ties keeps the sample."""
    s = np.asarray(signal, dtype=float)
    half = window // 2
    out = []
    for i in range(len(s)):
        m = np.median(s[max(0, i - half):i + half + 1])
        out.append(bool(s[i]) if m == 0.5 else bool(m > 0.5))
    return np.array(out, dtype=bool)


class TestMedianFilter:
    def test_constant(self):
        for v in (0, 1):
            np.testing.assert_array_equal(median_filter_binary([v] * 30), [bool(v)] * 30)

    def test_isolated_spike(self):
        s = np.zeros(40, bool)
        s[20] = True
        assert not median_filter_binary(s, 17).any()

    def test_alternating(self):
        s = np.arange(40) % 2 == 1
        np.testing.assert_array_equal(median_filter_binary(s, 17), naive_median(s, 17))

    def test_even_window(self):
        with pytest.raises(EvenWindow):
            median_filter_binary([1, 0, 1], 4)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.booleans(), max_size=200), st.sampled_from([1, 3, 5, 17]))
    def test_matches_naive(self, s, window):
        np.testing.assert_array_equal(median_filter_binary(s, window), naive_median(s, window))


class TestInteractions:
    def test_runs(self):
        segs = extract_interactions([int(c) for c in "000111011"])
        assert [s.frame_ids for s in segs] == [(3, 4, 5), (7, 8)]
        assert [s.interaction_id for s in segs] == [0, 1]

    def test_all_false(self):
        assert extract_interactions([0] * 5) == []

    def test_all_true(self):
        segs = extract_interactions([1] * 7)
        assert len(segs) == 1 and len(segs[0]) == 7

    def test_frame_gap_splits(self):
        segs = extract_interactions([1, 1, 1, 1], frame_ids=[10, 11, 20, 21])
        assert [s.frame_ids for s in segs] == [(10, 11), (20, 21)]

    def test_segment_table_round_trip(self, tmp_path):
        segs = extract_interactions([int(c) for c in "0110111"])
        write_segment_table(segs, tmp_path / "s.csv")
        assert read_segment_table(tmp_path / "s.csv") == segs


class TestIntervalSample:
    def test_thirty_two(self):
        picks = interval_sample(InteractionSegment(0, tuple(range(100, 132))), 16, seed=3)
        assert len(picks) == 16
        assert [(p - 100) // 2 for p in picks] == list(range(16))

    def test_short_segment(self):
        seg = InteractionSegment(0, tuple(range(10)))
        assert interval_sample(seg, 16).tolist() == list(range(10))

    def test_seeded(self):
        seg = InteractionSegment(0, tuple(range(77)))
        np.testing.assert_array_equal(interval_sample(seg, 16, 5), interval_sample(seg, 16, 5))

    @settings(max_examples=100, deadline=None)
    @given(st.integers(1, 300), st.integers(1, 20), st.integers(0, 1000))
    def test_invariants(self, length, n, seed):
        frames = np.arange(length) + 50
        picks = interval_sample(frames, n, seed)
        assert len(picks) == min(length, n)
        assert set(picks.tolist()) <= set(frames.tolist())
        assert np.all(np.diff(picks) > 0)
        if length > n:
            for part, p in zip(np.array_split(frames, n), picks):
                assert p in part

    def test_sample_interactions_independent_streams(self):
        segs = extract_interactions([1] * 40 + [0] + [1] * 40)
        both = sample_interactions(segs, 16, seed=1)
        alone = sample_interactions(segs[1:], 16, seed=1)
        np.testing.assert_array_equal(both[16:], alone)


class TestTaskSample:
    def test_even_strata(self):
        picks = uniform_task_sample({"a": range(160)}, 16, seed=0)
        assert len(picks) == 16
        assert [p // 10 for p in picks] == list(range(16))

    def test_short_task(self):
        assert uniform_task_sample({"a": [4, 2, 9, 7, 1]}).tolist() == [1, 2, 4, 7, 9]

    def test_balanced(self):
        picks = uniform_task_sample({"long": range(1000), "short": range(5000, 5020)}, 16, seed=2)
        assert np.sum(picks < 1000) == 16 and np.sum(picks >= 5000) == 16

    def test_missing_task(self):
        with pytest.raises(MissingTaskIds):
            group_by_task([1, 2], ["a", None])

    @settings(max_examples=50, deadline=None)
    @given(st.dictionaries(st.text("abc", min_size=1, max_size=3), st.integers(1, 60), min_size=1, max_size=5),
           st.integers(1, 20))
    def test_cap(self, sizes, cap):
        tasks, start = {}, 0
        for name, size in sizes.items():
            tasks[name] = list(range(start, start + size))
            start += size + 100
        picks = set(uniform_task_sample(tasks, cap, seed=1).tolist())
        for frames in tasks.values():
            assert len(picks & set(frames)) == min(cap, len(frames))


class TestPhases:
    def _labels(self, length):
        return label_phases(InteractionSegment(0, tuple(range(length)))).phase_labels

    def test_twenty(self):
        assert self._labels(20) == (TRANSITORY,) * 2 + (STABLE,) * 16 + (TRANSITORY,) * 2

    def test_ten(self):
        assert self._labels(10) == (TRANSITORY,) + (STABLE,) * 8 + (TRANSITORY,)

    def test_two(self):
        assert self._labels(2) == (TRANSITORY, TRANSITORY)

    def test_ceiling(self):
        # ceil(0.1 * 21) = 3
        labels = self._labels(21)
        assert labels[:3] == (TRANSITORY,) * 3 and labels[3] == STABLE and labels[-3:] == (TRANSITORY,) * 3
