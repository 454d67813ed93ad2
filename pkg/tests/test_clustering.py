import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grasptax.clustering import (ClusterModel, gmm_em, kmeans_lp, knn_affinity, log_likelihood,
                                 minkowski, responsibilities, spectral_cluster)
from grasptax.clustering.gmm import run_em
from grasptax.errors import DisconnectedGraphWarning, KExceedsN, UnknownCluster, ValidationError
from grasptax.metrics import nmi


def _two_blobs(n=200, d=2, sep=20.0, seed=0):
    rng = np.random.default_rng(seed)
    y = np.repeat([0, 1], n // 2)
    return rng.normal(size=(n, d)) + sep * y[:, None], y


def _agreement(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return max(np.mean(a == b), np.mean(a == 1 - b))


class TestMinkowski:
    def test_against_scipy(self):
        from scipy.spatial.distance import cdist
        rng = np.random.default_rng(0)
        x, c = rng.normal(size=(30, 4)), rng.normal(size=(3, 4))
        for p in (2.0, 1.0, 3.0):
            np.testing.assert_allclose(minkowski(x, c, p), cdist(x, c, "minkowski", p=p), rtol=1e-12)

    def test_fractional(self):
        x = np.array([[1.0, 1.0]])
        c = np.zeros((1, 2))
        # (1^0.5 + 1^0.5)^(1/0.5) = 4
        assert minkowski(x, c, 0.5)[0, 0] == pytest.approx(4.0, rel=1e-14)


class TestKMeans:
    def test_one_dimensional_pairs(self):
        x = np.array([[0.0], [0.1], [10.0], [10.1]])
        # exhaustive 2-partition oracle for the squared-distance cost
        best = None
        for mask in itertools.product([0, 1], repeat=4):
            m = np.array(mask)
            if m.min() == m.max():
                continue
            cost = sum(((x[m == j] - x[m == j].mean()) ** 2).sum() for j in (0, 1))
            if best is None or cost < best[0]:
                best = (cost, m)
        model = kmeans_lp(x, 2, p=2, seed=0)
        assert _agreement(model.assignments, best[1]) == 1.0
        np.testing.assert_allclose(np.sort(model.centers[:, 0]), [0.05, 10.05], atol=1e-12)

    def test_k_equals_n(self):
        x = np.random.default_rng(1).normal(size=(6, 3))
        model = kmeans_lp(x, 6, seed=0)
        assert sorted(model.assignments.tolist()) == list(range(6))
        np.testing.assert_allclose(model.center_distance, 0.0, atol=1e-12)

    def test_deterministic(self):
        x, _ = _two_blobs(seed=3)
        a, b = kmeans_lp(x, 3, p=1, seed=11), kmeans_lp(x, 3, p=1, seed=11)
        np.testing.assert_array_equal(a.assignments, b.assignments)
        np.testing.assert_array_equal(a.centers, b.centers)

    def test_k_exceeds_n(self):
        with pytest.raises(KExceedsN):
            kmeans_lp(np.zeros((3, 2)), 4)

    def test_bad_p(self):
        with pytest.raises(ValidationError):
            kmeans_lp(np.zeros((3, 2)), 2, p=0)

    def test_cost_trace_nonincreasing_for_p2(self):
        x = np.random.default_rng(5).normal(size=(300, 3))
        model = kmeans_lp(x, 5, p=2, n_init=1, seed=2)
        assert np.all(np.diff(model.trace) <= 1e-9 * model.trace[0])

    def test_scores(self):
        x, _ = _two_blobs(seed=4)
        model = kmeans_lp(x, 2, p=0.5, seed=0)
        np.testing.assert_allclose(model.score_per_row, -model.center_distance)
        own = minkowski(x, model.centers, 0.5)[np.arange(len(x)), model.assignments]
        np.testing.assert_allclose(model.center_distance, own)


class TestGMM:
    def test_two_blobs_tied(self):
        x, y = _two_blobs(n=200, sep=20.0, seed=0)
        model = gmm_em(x, 2, "tied", n_init=5, seed=0)
        assert _agreement(model.assignments, y) >= 0.99
        assert model.converged

    @pytest.mark.parametrize("cov", ["full", "spherical", "diagonal", "tied"])
    def test_single_component(self, cov):
        x = np.random.default_rng(2).normal(3.0, 2.0, size=(50, 3))
        model = gmm_em(x, 1, cov, n_init=2, seed=0)
        np.testing.assert_allclose(model.centers[0], x.mean(axis=0), atol=1e-10)
        np.testing.assert_allclose(model.weights, [1.0])

    def test_regularization_escalates(self):
        rng = np.random.default_rng(0)
        base = rng.normal(size=(100, 2))
        x = np.column_stack([base, 1e6 * base[:, 0], 1e6 * base[:, 0]])
        model = gmm_em(x, 2, "full", n_init=1, seed=0)
        assert model.reg > 1e-6
        assert model.converged

    def test_log_likelihood_closed_form(self):
        model = ClusterModel("gmm", 1, [0], [0.0], [0.0], np.zeros((1, 1)), 0, True, 0,
                             covariance_type="spherical", covariances=np.array([1.0]),
                             weights=np.array([1.0]))
        assert log_likelihood(model, np.zeros((1, 1))) == pytest.approx(-0.5 * math.log(2 * math.pi),
                                                                       rel=1e-15)
        assert log_likelihood(model, np.zeros((1, 1))) == pytest.approx(-0.9189385332046727, abs=1e-15)

    def test_responsibilities_sum_to_one(self):
        x, _ = _two_blobs(seed=6, sep=3.0)
        model = gmm_em(x, 3, "diagonal", n_init=2, seed=0)
        r = responsibilities(model, x)
        np.testing.assert_allclose(r.sum(axis=1), 1.0, atol=1e-12)

    def test_worker_count_does_not_change_result(self):
        x, _ = _two_blobs(seed=7, sep=4.0)
        a = gmm_em(x, 3, "tied", n_init=6, seed=5, workers=1)
        b = gmm_em(x, 3, "tied", n_init=6, seed=5, workers=4)
        assert a.to_json() == b.to_json()

    def test_model_json_round_trip(self, tmp_path):
        x, _ = _two_blobs(seed=8)
        model = gmm_em(x, 2, "full", n_init=2, seed=1)
        model.to_json(tmp_path / "model.json")
        back = ClusterModel.from_json(tmp_path / "model.json")
        assert back.to_json() == model.to_json()
        np.testing.assert_array_equal(back.covariances, model.covariances)

    def test_unknown_cluster(self):
        model = kmeans_lp(np.arange(6.0)[:, None], 2, seed=0)
        with pytest.raises(UnknownCluster):
            model.members(5)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["full", "spherical", "diagonal", "tied"]),
       st.integers(1, 4))
def test_em_never_decreases(seed, cov, k):
    rng = np.random.default_rng(seed)
    x = np.vstack([rng.normal(c, 1.0, (30, 3)) for c in rng.normal(0, 3, (3, 3))])
    run = run_em(x, x[rng.choice(len(x), k, replace=False)], cov, 1e-6, 300, 1e-3)
    assert np.all(np.diff(run.trace) >= -1e-8)


class TestSpectral:
    def test_square(self):
        square = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DisconnectedGraphWarning)
            model = spectral_cluster(square, 2, n_neighbors=1, seed=0)
        assert sorted(model.cluster_sizes().tolist()) == [2, 2]

    def test_separated_blobs(self):
        x, y = _two_blobs(n=200, sep=20.0, seed=1)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DisconnectedGraphWarning)
            model = spectral_cluster(x, 2, n_neighbors=20, seed=0)
        assert _agreement(model.assignments, y) == 1.0

    def test_neighbour_count_does_not_matter(self):
        x, _ = _two_blobs(n=300, d=3, sep=25.0, seed=2)
        parts = []
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DisconnectedGraphWarning)
            for nn in (40, 60, 80, 100):
                parts.append(spectral_cluster(x, 2, n_neighbors=nn, seed=0).assignments)
        for p in parts[1:]:
            assert nmi(p, parts[0]) == 1.0

    def test_affinity_symmetric_binary(self):
        x = np.random.default_rng(3).normal(size=(40, 2))
        a = knn_affinity(x, 5)
        dense = a.toarray() if hasattr(a, "toarray") else np.asarray(a)
        np.testing.assert_array_equal(dense, dense.T)
        assert set(np.unique(dense)) <= {0.0, 1.0}
        assert np.all(np.diag(dense) == 0)
        assert np.all(dense.sum(axis=1) >= 5)

    def test_disconnected_warning(self):
        x, _ = _two_blobs(n=60, sep=100.0, seed=4)
        with pytest.warns(DisconnectedGraphWarning):
            spectral_cluster(x, 2, n_neighbors=5, seed=0)
