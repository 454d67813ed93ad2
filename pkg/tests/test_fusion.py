import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.spatial.distance import cdist

from grasptax.errors import NotNormalized, RowMismatch, TooFewRows
from grasptax.fusion import FeatureMatrix, fuse_views, zscore_normalize


def _fm(data, tag="pose", fids=None):
    return FeatureMatrix(np.asarray(data, dtype=float), (tag,), frame_ids=fids)


class TestZScore:
    def test_one_two_three(self):
        out = zscore_normalize(_fm([[1], [2], [3]])).data[:, 0]
        # population std of [1,2,3] is sqrt(2/3), so the ends sit at -+sqrt(3/2)
        np.testing.assert_allclose(out, [-1.224744871391589, 0.0, 1.224744871391589], rtol=0, atol=1e-15)

    def test_constant_column(self):
        m = zscore_normalize(_fm([[7, 1], [7, 2], [7, 3]]))
        assert m.data[:, 0].tolist() == [0.0, 0.0, 0.0]
        assert m.norm_stats.std[0] == 0.0 and m.norm_stats.mean[0] == 7.0

    def test_idempotent(self):
        m = zscore_normalize(_fm(np.random.default_rng(0).normal(3, 2, (50, 4))))
        np.testing.assert_allclose(zscore_normalize(m).data, m.data, atol=1e-12)

    def test_too_few_rows(self):
        with pytest.raises(TooFewRows):
            zscore_normalize(_fm([[1.0, 2.0]]))

    def test_underflowing_spread(self):
        out = zscore_normalize(_fm([[0.0], [5e-178]]))
        assert out.data.tolist() == [[0.0], [0.0]] and out.norm_stats.std.tolist() == [0.0]

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, st.tuples(st.integers(2, 30), st.integers(1, 5)),
                  elements=st.floats(-1e4, 1e4, allow_subnormal=False)))
    def test_moments(self, x):
        out = zscore_normalize(_fm(x)).data
        constant = np.ptp(x, axis=0) == 0
        assert np.all(out[:, constant] == 0)
        # skip columns whose spread is lost to rounding
        ok = ~constant & (x.std(axis=0) > 1e-6 * (np.abs(x).max(axis=0) + 1))
        np.testing.assert_allclose(out[:, ok].mean(axis=0), 0, atol=1e-9)
        np.testing.assert_allclose(out[:, ok].std(axis=0), 1, atol=1e-9)


class TestFuse:
    def _views(self, n=10, dp=63, da=1024, seed=0):
        rng = np.random.default_rng(seed)
        fids = np.arange(n) * 3
        pose = zscore_normalize(_fm(rng.normal(size=(n, dp)), "pose", fids))
        app = zscore_normalize(_fm(rng.normal(size=(n, da)), "appearance", fids))
        return pose, app

    def test_dimensions(self):
        fused = fuse_views(*self._views())
        assert fused.shape == (10, 1087)
        assert fused.provenance[:63] == ("pose",) * 63
        assert fused.provenance[63:] == ("appearance",) * 1024

    def test_unit_weight_is_concatenation(self):
        pose, app = self._views()
        np.testing.assert_array_equal(fuse_views(pose, app, 1.0).data, np.hstack([pose.data, app.data]))

    def test_weight_scales_pose_only(self):
        pose, app = self._views()
        pose = FeatureMatrix(np.full_like(pose.data, 0.2), pose.provenance, pose.norm_stats, pose.frame_ids)
        fused = fuse_views(pose, app, 5.0)
        np.testing.assert_allclose(fused.data[:, :63], 1.0, rtol=1e-15)
        np.testing.assert_array_equal(fused.data[:, 63:], app.data)

    def test_requires_normalized(self):
        pose, app = self._views()
        with pytest.raises(NotNormalized):
            fuse_views(_fm(pose.data), app)

    def test_row_mismatch(self):
        pose, app = self._views()
        with pytest.raises(RowMismatch):
            fuse_views(pose.take(np.arange(9)), app)
        shuffled = app.take(np.r_[1, 0, 2:10])
        with pytest.raises(RowMismatch):
            fuse_views(pose, shuffled)

    @pytest.mark.parametrize("w", [0.001, 1.0, 5.0, 100.0])
    def test_distance_law(self, w):
        pose, app = self._views(n=20, seed=1)
        fused = fuse_views(pose, app, w)
        d2 = cdist(fused.data, fused.data, "sqeuclidean")
        expected = w**2 * cdist(pose.data, pose.data, "sqeuclidean") + cdist(app.data, app.data, "sqeuclidean")
        np.testing.assert_allclose(d2, expected, rtol=1e-9, atol=1e-9)

    def test_large_weight_neighbours_follow_pose(self):
        pose, app = self._views(n=60, dp=10, da=20, seed=2)
        fused = fuse_views(pose, app, 100.0)
        k = 5
        nn = lambda x: np.argsort(cdist(x, x), axis=1, kind="stable")[:, 1:k + 1]
        np.testing.assert_array_equal(nn(fused.data), nn(pose.data))
