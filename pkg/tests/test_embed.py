import math

import numpy as np
import pytest

from abstain_ea.embed import (
    AdamState,
    EmbeddingSpace,
    NonFiniteError,
    accumulate_rows,
    adam_step,
    finite_diff_check,
    l2_normalize_rows,
    load_checkpoint,
    save_checkpoint,
    xavier_init,
)


class TestXavier:
    def test_bound(self):
        w = xavier_init(2, 3, seed=0)
        assert w.shape == (2, 3)
        assert np.all(np.abs(w) <= math.sqrt(6 / 5))
        assert math.isclose(math.sqrt(6 / 5), 1.09545, abs_tol=1e-5)

    def test_single(self):
        w = xavier_init(1, 1, seed=4)
        assert abs(w[0, 0]) <= math.sqrt(3)

    def test_seeded(self):
        np.testing.assert_array_equal(xavier_init(5, 4, 7), xavier_init(5, 4, 7))


def test_space_rows_unit_norm():
    space = EmbeddingSpace.initialize(6, 2, 5, 3, 4, seed=0)
    np.testing.assert_allclose(np.linalg.norm(space.ent1, axis=1), 1.0)
    np.testing.assert_allclose(np.linalg.norm(space.ent2, axis=1), 1.0)
    assert space.transform.shape == (4, 4)


def test_normalize_subset():
    t = np.array([[3.0, 4.0], [0.0, 2.0], [0.0, 0.0]])
    l2_normalize_rows(t, np.array([0, 2]))
    np.testing.assert_allclose(t, [[0.6, 0.8], [0.0, 2.0], [0.0, 0.0]])


class TestAdam:
    def test_zero_grad_noop(self):
        p = np.array([1.0, -2.0])
        adam_step(p, np.zeros(2), AdamState.like(p, 0.001))
        np.testing.assert_array_equal(p, [1.0, -2.0])

    def test_first_step_value(self):
        p = np.array([0.0])
        adam_step(p, np.array([1.0]), AdamState.like(p, 0.001))
        assert math.isclose(p[0], -0.001 / (1 + 1e-8), rel_tol=1e-12)
        assert math.isclose(p[0], -0.000999999, abs_tol=1e-9)

    def test_monotone(self):
        p = np.array([0.0])
        s = AdamState.like(p, 0.001)
        adam_step(p, np.array([1.0]), s)
        first = p[0]
        adam_step(p, np.array([1.0]), s)
        assert p[0] < first < 0

    def test_sparse_rows_touch_only_rows(self):
        p = np.ones((4, 2))
        s = AdamState.like(p, 0.1)
        adam_step(p, np.ones((2, 2)), s, rows=np.array([1, 3]))
        np.testing.assert_array_equal(p[[0, 2]], 1.0)
        assert np.all(p[[1, 3]] < 1.0)
        np.testing.assert_array_equal(s.row_steps, [0, 1, 0, 1])

    def test_lazy_bias_correction_matches_dense_first_step(self):
        # a row's first sparse update equals a fresh dense first step
        p = np.zeros((3, 2))
        s = AdamState.like(p, 0.01)
        adam_step(p, np.ones((1, 2)), s, rows=np.array([0]))
        adam_step(p, np.full((1, 2), 2.0), s, rows=np.array([0]))
        adam_step(p, np.full((1, 2), 5.0), s, rows=np.array([2]))
        q = np.zeros(2)
        adam_step(q, np.full(2, 5.0), AdamState.like(q, 0.01))
        np.testing.assert_allclose(p[2], q)

    def test_nan_raises(self):
        p = np.zeros(2)
        with pytest.raises(NonFiniteError):
            adam_step(p, np.array([np.nan, 0.0]), AdamState.like(p))


def test_accumulate_rows():
    ids, g = accumulate_rows(np.array([2, 0, 2]), np.array([[1.0], [2.0], [3.0]]))
    np.testing.assert_array_equal(ids, [0, 2])
    np.testing.assert_array_equal(g, [[2.0], [4.0]])


class TestFiniteDiff:
    def test_quadratic(self, rng):
        p = rng.normal(size=5)
        err = finite_diff_check(lambda q: 0.5 * float(q["p"] @ q["p"]), {"p": p}, {"p": p})
        assert err < 1e-8

    def test_wrong_gradient(self):
        p = np.array([0.7, -1.3, 2.0])
        err = finite_diff_check(lambda q: 0.5 * float(q["p"] @ q["p"]), {"p": p}, {"p": 2 * p})
        assert math.isclose(err, 1 / 3, rel_tol=1e-6)

    def test_constant(self):
        err = finite_diff_check(lambda q: 3.0, {"p": np.ones(3)}, {"p": np.zeros(3)})
        assert err == 0.0


class TestCheckpoint:
    def test_roundtrip(self, tmp_path):
        arrays = {"b": np.arange(6.0).reshape(2, 3), "a": np.array([1, 2], dtype=np.int64)}
        save_checkpoint(tmp_path / "c.ckpt", arrays, {"k": 1})
        back, meta = load_checkpoint(tmp_path / "c.ckpt")
        assert meta["k"] == 1
        for k, v in arrays.items():
            np.testing.assert_array_equal(back[k], v)
            assert back[k].dtype == v.dtype

    def test_bytes_deterministic(self, tmp_path):
        arrays = {"x": np.linspace(0, 1, 7)}
        save_checkpoint(tmp_path / "a", arrays, {"m": [1, 2]})
        save_checkpoint(tmp_path / "b", arrays, {"m": [1, 2]})
        assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()

    def test_bad_magic(self, tmp_path):
        (tmp_path / "bad").write_bytes(b"not a checkpoint at all")
        with pytest.raises(ValueError):
            load_checkpoint(tmp_path / "bad")
