import numpy as np
import pytest

from abstain_ea.nnindex import (
    cosine_similarity,
    csls_matrix,
    gold_ranks,
    knn,
    nearest,
    refresh_cache,
)


class TestKnn:
    def test_exact_match_first(self, rng):
        t = rng.normal(size=(20, 4))
        idx, dist = knn(t[[7]], t, 3)
        assert idx[0, 0] == 7 and dist[0, 0] == 0.0

    def test_hand_2d(self):
        idx, _ = nearest(np.array([[0.9, 0.1]]), np.array([[1.0, 0.0], [0.0, 1.0]]))
        assert idx[0] == 0

    def test_duplicate_targets_lower_index(self):
        t = np.array([[1.0, 1.0], [0.0, 0.0], [0.0, 0.0]])
        idx, _ = knn(np.array([[0.1, 0.0]]), t, 2)
        assert idx[0].tolist() == [1, 2]

    def test_workers_do_not_change_results(self, rng):
        q = rng.normal(size=(600, 5))
        t = rng.normal(size=(300, 5))
        a = knn(q, t, 4, workers=1)
        b = knn(q, t, 4, workers=3)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    def test_matches_full_sort(self, rng):
        q = rng.normal(size=(15, 3))
        t = rng.normal(size=(40, 3))
        idx, dist = knn(q, t, 5)
        full = np.linalg.norm(q[:, None] - t[None], axis=2)
        np.testing.assert_array_equal(idx, np.argsort(full, axis=1, kind="stable")[:, :5])
        np.testing.assert_allclose(dist, np.sort(full, axis=1)[:, :5])

    def test_cosine_metric(self, rng):
        q = rng.normal(size=(4, 3))
        t = rng.normal(size=(9, 3))
        idx, sim = knn(q, t, 2, metric="cosine")
        c = cosine_similarity(q, t)
        np.testing.assert_array_equal(idx[:, 0], c.argmax(axis=1))

    def test_empty_targets(self):
        with pytest.raises(ValueError):
            knn(np.ones((1, 2)), np.zeros((0, 2)), 1)


class TestCsls:
    def test_uniform_cosines_give_zero(self):
        s = np.array([[1.0, 0.0], [1.0, 0.0]])
        t = np.array([[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]])
        np.testing.assert_allclose(csls_matrix(s, t, 2), 0.0)

    def test_hand_example(self, monkeypatch):
        import abstain_ea.nnindex as nn

        cos = np.array([[0.9, 0.1], [0.2, 0.8]])
        monkeypatch.setattr(nn, "cosine_similarity", lambda a, b: cos)
        out = nn.csls_matrix(np.zeros((2, 2)), np.ones((2, 2)), 1)
        assert np.isclose(out[0, 0], 0.0) and np.isclose(out[0, 1], -1.5)

    def test_argmax_matches_bruteforce(self, rng):
        s = rng.normal(size=(5, 3))
        t = rng.normal(size=(5, 3))
        k = 2
        c = [[float(a @ b / np.linalg.norm(a) / np.linalg.norm(b)) for b in t] for a in s]
        r_t = [sum(sorted(row, reverse=True)[:k]) / k for row in c]
        r_s = [sum(sorted((c[i][j] for i in range(5)), reverse=True)[:k]) / k for j in range(5)]
        brute = [[2 * c[i][j] - r_t[i] - r_s[j] for j in range(5)] for i in range(5)]
        np.testing.assert_allclose(csls_matrix(s, t, k), brute, atol=1e-12)

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError):
            cosine_similarity(np.zeros((1, 2)), np.ones((2, 2)))


def test_gold_ranks_ties_and_mask():
    scores = np.array([[0.5, 0.9, 0.5, 0.1]])
    assert gold_ranks(scores, np.array([2]))[0] == 3
    mask = np.array([True, False, True, True])
    assert gold_ranks(scores, np.array([2]), mask)[0] == 2


class TestCache:
    def test_refresh_schedule(self, rng):
        s = rng.normal(size=(10, 3))
        t = rng.normal(size=(8, 3))
        c0 = refresh_cache(s, t, [1, 4], epoch=0)
        assert refresh_cache(s, t, [1, 4], epoch=10, cache=c0) is not c0
        assert refresh_cache(s, t, [1, 4], epoch=11, cache=c0) is c0

    def test_cached_distance_matches_knn(self, rng):
        s = rng.normal(size=(10, 3))
        t = rng.normal(size=(8, 3))
        cache = refresh_cache(s, t, [5, 2, 9], epoch=0)
        nn, dist = cache.lookup(np.array([9]))
        idx, d = knn(s[[9]], t, 1)
        assert nn[0] == idx[0, 0] and dist[0] == d[0, 0]

    def test_unknown_entity(self, rng):
        cache = refresh_cache(rng.normal(size=(4, 2)), rng.normal(size=(3, 2)), [0], epoch=0)
        with pytest.raises(KeyError):
            cache.lookup(np.array([3]))
