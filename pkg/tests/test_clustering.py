"""Косинусный k-means, число кластеров и флаги «тот же кластер»."""
import numpy as np
import pytest

from backend.ccc.clustering import (
    ClusterConfig,
    _repair_empty,
    _unit_rows,
    cluster_batch,
    kmeans_cosine,
    num_clusters,
    same_cluster_mask,
)
from backend.ccc.errors import ClusteringError


def _bundles(rng, per_bundle=20, dim=8, spread=0.05):
    u = rng.normal(size=dim)
    u /= np.linalg.norm(u)
    plus = u + spread * rng.normal(size=(per_bundle, dim))
    minus = -u + spread * rng.normal(size=(per_bundle, dim))
    return np.concatenate([plus, minus]), np.repeat([0, 1], per_bundle)


class TestNumClusters:
    @pytest.mark.parametrize("nf, cf, k", [(380, 16, 24), (60, 8, 8), (49, 4, 13)])
    def test_ceil(self, nf, cf, k):
        assert num_clusters(nf, cf) == k

    def test_bypass(self):
        assert num_clusters(100, 1) is None

    def test_clamped_to_points(self):
        assert num_clusters(100, 2, points=12) == 12

    def test_invalid(self):
        with pytest.raises(ClusteringError):
            num_clusters(0, 4)


class TestKMeans:
    def test_single_cluster(self, rng):
        points = rng.normal(size=(15, 6))
        result = kmeans_cosine(points, 1, rng=rng)
        assert np.all(result.assignments == 0)
        direction = _unit_rows(points).sum(axis=0)
        np.testing.assert_allclose(result.centroids[0], direction / np.linalg.norm(direction), atol=1e-7)

    def test_each_point_own_cluster(self, rng):
        points = np.eye(5) * rng.uniform(0.5, 2.0, size=5)[:, None]
        result = kmeans_cosine(points, 5, rng=rng)
        assert len(set(result.assignments.tolist())) == 5
        assert result.inertia < 1e-6

    def test_antipodal_bundles(self):
        for trial in range(100):
            rng = np.random.default_rng(trial)
            points, planted = _bundles(rng)
            labels = kmeans_cosine(points, 2, rng=rng).assignments
            same = labels == labels[0]
            np.testing.assert_array_equal(same, planted == 0)

    def test_nearest_centroid(self, rng):
        points = rng.normal(size=(60, 5))
        result = kmeans_cosine(points, 7, rng=rng)
        sims = _unit_rows(points) @ result.centroids.T
        np.testing.assert_array_equal(result.assignments, sims.argmax(axis=1))

    def test_inertia_non_increasing(self):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            history = kmeans_cosine(rng.normal(size=(80, 4)), 6, rng=rng).inertia_history
            assert np.all(np.diff(history) <= 1e-6)

    def test_iteration_limit(self, rng):
        result = kmeans_cosine(rng.normal(size=(200, 3)), 20, max_iterations=3, rng=rng)
        assert result.iterations <= 3
        assert len(result.inertia_history) == result.iterations

    def test_identical_points_share_cluster(self, rng):
        points = np.concatenate([rng.normal(size=(20, 4)), np.tile(rng.normal(size=(1, 4)), (6, 1))])
        labels = kmeans_cosine(points, 4, rng=rng).assignments
        assert len(set(labels[20:].tolist())) == 1

    def test_zero_point_is_assigned(self, rng):
        points = np.concatenate([rng.normal(size=(10, 3)), np.zeros((1, 3))])
        result = kmeans_cosine(points, 3, rng=rng)
        assert 0 <= result.assignments[-1] < 3

    def test_k_out_of_range(self, rng):
        with pytest.raises(ClusteringError):
            kmeans_cosine(rng.normal(size=(4, 3)), 5)

    def test_seeded(self):
        points = np.random.default_rng(0).normal(size=(50, 4))
        a = kmeans_cosine(points, 5, rng=np.random.default_rng(9)).assignments
        b = kmeans_cosine(points, 5, rng=np.random.default_rng(9)).assignments
        np.testing.assert_array_equal(a, b)

    def test_empty_cluster_repair(self):
        unit = _unit_rows(np.array([[1.0, 0.0], [0.9, 0.1], [0.0, 1.0]]))
        labels = np.zeros(3, dtype=np.int64)
        centroids = np.array([[1.0, 0.0], [0.0, -1.0]])
        assert _repair_empty(unit, labels, centroids, 2) == 1
        assert labels.tolist() == [0, 0, 1]
        np.testing.assert_allclose(centroids[1], unit[2])


class TestSameClusterMask:
    def test_singleton(self):
        assert not same_cluster_mask(np.array([0, 1, 1, 1]), 0, [1, 2, 3]).any()

    def test_single_cluster(self):
        assert same_cluster_mask(np.zeros(5, dtype=int), 2, [0, 1, 3, 4]).all()

    def test_matches_direct_comparison(self, rng):
        result = kmeans_cosine(rng.normal(size=(30, 4)), 4, rng=rng)
        negatives = rng.integers(0, 30, size=12)
        expected = result.assignments[negatives] == result.assignments[7]
        np.testing.assert_array_equal(same_cluster_mask(result, 7, negatives), expected)

    def test_out_of_range(self):
        with pytest.raises(ClusteringError):
            same_cluster_mask(np.zeros(3, dtype=int), 0, [3])


class TestClusterBatch:
    def _targets(self, rng, counts=(10, 14), dim=6):
        total = sum(counts)
        return rng.normal(size=(total, dim)), rng.normal(size=(total, dim)), np.array(counts)

    def test_bypass(self, rng):
        q, qp, counts = self._targets(rng)
        assert cluster_batch(q, qp, counts, 24, ClusterConfig(cf=1)) is None

    def test_per_view(self, rng):
        q, qp, counts = self._targets(rng)
        ids = cluster_batch(q, qp, counts, 24, ClusterConfig(cf=4))
        assert ids.original.shape == ids.augmented.shape == (24,)
        # k = ceil(24/4) = 6, не больше числа точек фрагмента
        assert ids.ks == [6, 6, 6, 6]
        assert ids.original[:10].max() < 6

    def test_pooled_k(self, rng):
        q, qp, counts = self._targets(rng)
        assert cluster_batch(q, qp, counts, 24, ClusterConfig(cf=4, pooled=True)).ks == [12, 12]
        single = ClusterConfig(cf=4, pooled=True, pooled_k_source="single")
        assert cluster_batch(q, qp, counts, 24, single).ks == [6, 6]

    def test_deterministic_per_step(self, rng):
        q, qp, counts = self._targets(rng)
        config = ClusterConfig(cf=4)
        a = cluster_batch(q, qp, counts, 24, config, step=5)
        b = cluster_batch(q, qp, counts, 24, config, step=5)
        np.testing.assert_array_equal(a.original, b.original)
        np.testing.assert_array_equal(a.augmented, b.augmented)

    def test_step_count_mismatch(self, rng):
        q, qp, _ = self._targets(rng)
        with pytest.raises(ClusteringError):
            cluster_batch(q, qp, [10, 10], 24, ClusterConfig(cf=4))
