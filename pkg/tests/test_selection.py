import math
import warnings

import numpy as np
import pytest

from _helpers import make_model
from grasptax.clustering import ClusterModel, gmm_em
from grasptax.config import EngineConfig, KMeansConfig
from grasptax.errors import EmptyModelWarning, LowCurvatureWarning, RangeTooNarrow
from grasptax.selection import (bic, elbow_index, estimate_k, filter_small_clusters, n_parameters,
                                select_k_by_silhouette)


def _blobs(k, n_per=100, d=2, sep=15.0, seed=0):
    rng = np.random.default_rng(seed)
    centers = sep * np.eye(max(k, d))[:k, :d] if k <= d else rng.uniform(-3 * sep, 3 * sep, (k, d))
    y = np.repeat(np.arange(k), n_per)
    return centers[y] + rng.normal(size=(k * n_per, d)), y


class TestBIC:
    def _unit_model(self):
        return ClusterModel("gmm", 1, [0, 0], [0.0, 0.0], [1.0, 1.0], np.zeros((1, 1)), 0, True, 0,
                            covariance_type="spherical", covariances=np.array([1.0]),
                            weights=np.array([1.0]))

    def test_two_points(self):
        x = np.array([[-1.0], [1.0]])
        # L = 2 log N(1; 0, 1); p = 1 mean + 0 weights + 1 variance
        expected = 2 * math.log(2) + 2 * (math.log(2 * math.pi) + 1)
        assert bic(self._unit_model(), x) == pytest.approx(expected, rel=1e-14)
        assert expected == pytest.approx(7.062, abs=5e-4)

    def test_fitted_two_points(self):
        x = np.array([[-1.0], [1.0]])
        model = gmm_em(x, 1, "spherical", n_init=1, seed=0)
        assert model.covariances[0] == pytest.approx(1.0 + 1e-6, rel=1e-12)
        assert bic(model, x) == pytest.approx(7.062, abs=1e-3)

    def test_duplicated_data(self):
        x = np.random.default_rng(0).normal(size=(40, 2))
        model = gmm_em(x, 2, "diagonal", n_init=2, seed=0)
        p = n_parameters(2, 2, "diagonal")
        b1, b2 = bic(model, x), bic(model, np.vstack([x, x]))
        loglik = (p * math.log(40) - b1) / 2
        assert b2 == pytest.approx(p * math.log(80) - 4 * loglik, rel=1e-12)

    def test_tied_equals_full_for_one_component(self):
        x = np.random.default_rng(1).normal(size=(60, 3))
        full = gmm_em(x, 1, "full", n_init=1, seed=0)
        tied = gmm_em(x, 1, "tied", n_init=1, seed=0)
        assert n_parameters(1, 3, "full") == n_parameters(1, 3, "tied")
        assert bic(full, x) == pytest.approx(bic(tied, x), rel=1e-12)

    def test_parameter_counts(self):
        assert n_parameters(3, 4, "full") == 12 + 2 + 30
        assert n_parameters(3, 4, "tied") == 12 + 2 + 10
        assert n_parameters(3, 4, "diagonal") == 12 + 2 + 12
        assert n_parameters(3, 4, "spherical") == 12 + 2 + 3


def test_elbow_index():
    # second differences at interior points: 5, -1, 0
    assert elbow_index([10, 0, -5, -11, -17]) == 1
    assert elbow_index([0, 0, 0, 0]) == 1


class TestEstimateK:
    def test_three_blobs(self):
        x, _ = _blobs(3, d=3, seed=2)
        res = estimate_k(x, (2, 8), seed=0)
        assert res.chosen_k == 3
        assert res.k_values == tuple(range(2, 9))
        assert res.model.k == 3 and res.model.params["n_init"] == 100

    def test_single_blob_flags_low_curvature(self):
        x = np.random.default_rng(3).normal(size=(300, 2))
        with pytest.warns(LowCurvatureWarning):
            res = estimate_k(x, (2, 6), seed=0)
        assert res.low_curvature

    def test_range_respected(self):
        x, _ = _blobs(4, d=2, seed=4)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", LowCurvatureWarning)
            res = estimate_k(x, (2, 4), seed=0)
        assert res.chosen_k in (2, 3, 4)

    def test_range_too_narrow(self):
        with pytest.raises(RangeTooNarrow):
            estimate_k(np.zeros((10, 2)), (2, 3))


class TestSilhouetteSelection:
    def test_two_blobs(self):
        x, _ = _blobs(2, d=2, sep=30.0, seed=5)
        res = select_k_by_silhouette(x, (2, 6), EngineConfig(), seed=0)
        assert res.chosen_k == 2
        assert res.criterion[0] > 0.9

    def test_singleton_range(self):
        x, _ = _blobs(3, d=2, seed=6)
        assert select_k_by_silhouette(x, (2, 2), EngineConfig("kmeans"), seed=0).chosen_k == 2

    def test_uniform_noise(self):
        x = np.random.default_rng(7).uniform(size=(200, 2))
        res = select_k_by_silhouette(x, (2, 5), EngineConfig("kmeans", KMeansConfig()), seed=0)
        assert res.chosen_k in range(2, 6)
        assert max(res.criterion) < 0.6


class TestFilter:
    def test_sizes_50_9_30(self):
        model = make_model(np.repeat([0, 1, 2], [50, 9, 30]))
        out = filter_small_clusters(model, 10)
        assert out.k == 2
        assert out.cluster_sizes().tolist() == [50, 30]
        assert int((out.assignments == -1).sum()) == 9
        assert out.source_clusters == (0, 2)
        assert out.assignments[:50].tolist() == [0] * 50 and out.assignments[59:].tolist() == [1] * 30

    def test_nothing_dropped(self):
        model = make_model(np.repeat([0, 1], [12, 10]))
        out = filter_small_clusters(model, 10)
        np.testing.assert_array_equal(out.assignments, model.assignments)
        assert out.k == 2

    def test_min_size_one(self):
        model = make_model([0, 1, 2, 2])
        assert filter_small_clusters(model, 1).k == 3

    def test_everything_dropped(self):
        with pytest.warns(EmptyModelWarning):
            out = filter_small_clusters(make_model([0, 1, 1]), 10)
        assert out.k == 0 and np.all(out.assignments == -1)

    def test_tied_covariance_kept(self):
        x, _ = _blobs(2, d=2, seed=8)
        x = np.vstack([x, [[100.0, 100.0]] * 3])
        model = gmm_em(x, 3, "tied", n_init=3, seed=0)
        out = filter_small_clusters(model, 10)
        assert out.k == 2
        assert out.covariances.shape == (2, 2)
