import math

import numpy as np
import pytest

from abstain_ea.detect import (
    BrConfig,
    MrConfig,
    NncParams,
    br_loss,
    detect,
    label_weights,
    mr_loss,
    nnc_forward,
    read_verdicts,
    weighted_bce,
    write_verdicts,
)
from abstain_ea.embed import finite_diff_check

import gradcases


def _zero_nnc(dim, hidden):
    return NncParams(np.zeros((dim, hidden)), np.zeros(hidden), np.zeros((hidden, 1)), np.zeros(1))


class TestNnc:
    def test_zero_weights_half(self, rng):
        p = nnc_forward(rng.normal(size=(3, 2)), rng.normal(size=(3, 2)), np.eye(2), _zero_nnc(2, 2))
        np.testing.assert_allclose(p, 0.5)

    def test_hand_sized(self):
        params = NncParams(
            w1=np.array([[1.0, 0.0], [0.0, -1.0]]),
            b1=np.array([0.0, 0.5]),
            w2=np.array([[2.0], [1.0]]),
            b2=np.array([-0.25]),
        )
        x, x_nn = np.array([[1.0, 1.0]]), np.array([[0.5, 0.0]])
        m = np.array([[1.0, 0.0], [0.0, 2.0]])
        # features M x - x_nn = (0.5, 2.0)
        hidden = np.tanh([0.5, -2.0 + 0.5])
        logit = 2.0 * hidden[0] + hidden[1] - 0.25
        assert math.isclose(nnc_forward(x, x_nn, m, params)[0], 1 / (1 + math.exp(-logit)))

    def test_strictly_inside_unit_interval(self, rng):
        params = NncParams.initialize(3, 4, rng)
        p = nnc_forward(rng.normal(size=(50, 3)) * 5, rng.normal(size=(50, 3)), np.eye(3), params)
        assert np.all((p > 0) & (p < 1))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            nnc_forward(np.ones((1, 3)), np.ones((1, 2)), np.eye(2), _zero_nnc(2, 2))

    def test_finite_difference(self):
        rng = np.random.default_rng(6)
        for case in gradcases.draw("nnc_loss", rng, 10):
            assert finite_diff_check(*case) < 1e-4


class TestBce:
    def test_certain_correct(self):
        assert weighted_bce([1.0], [1.0]) == 0.0

    def test_ln2(self):
        assert math.isclose(weighted_bce([1.0], [0.5], 1.0), math.log(2))

    def test_label_weights(self):
        w0, w1 = label_weights([1] * 10 + [0] * 30)
        assert w1 == 2.0 and math.isclose(w0, 2 / 3)

    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            label_weights([0, 0, 0])


def _mr_at(dist, margin=0.9):
    return mr_loss(np.array([[dist, 0.0]]), np.zeros((1, 2)), np.eye(2), MrConfig(margin))[0]


class TestMr:
    def test_inactive(self):
        assert _mr_at(1.2) == 0.0

    def test_active(self):
        assert math.isclose(_mr_at(0.4), 0.5)

    def test_boundary(self):
        assert _mr_at(0.9) == 0.0

    def test_finite_difference(self):
        rng = np.random.default_rng(7)
        for case in gradcases.draw("mr_loss", rng, 10):
            assert finite_diff_check(*case) < 1e-4


class TestBr:
    def test_equal_distances(self):
        x = np.array([[0.6, 0.8]])
        t = np.array([[[1.6, 0.8], [0.6, 1.8], [-0.4, 0.8]]])
        loss, _, lam = br_loss(x, t, np.eye(2), BrConfig(3, 0.01))
        assert math.isclose(loss, 0.01 * 1.0) and math.isclose(lam[0], 1.0)

    def test_hand_value(self):
        x = np.array([[2.0, 0.0]])
        t = np.array([[[1.0, 0.0], [5.0, 0.0]]])
        loss, _, lam = br_loss(x, t, np.eye(2), BrConfig(2, 0.01))
        assert math.isclose(lam[0], 2.0) and math.isclose(loss, 2.02)

    def test_alpha_zero(self):
        x = np.array([[0.0, 0.0]])
        t = np.array([[[1.0, 0.0], [0.0, 1.0]]])
        assert br_loss(x, t, np.eye(2), BrConfig(2, 0.0))[0] == 0.0

    def test_finite_difference(self):
        rng = np.random.default_rng(8)
        for case in gradcases.draw("br_loss", rng, 10):
            assert finite_diff_check(*case) < 1e-4

    def test_bad_config(self):
        with pytest.raises(ValueError):
            BrConfig(samples=0)


class TestInference:
    def test_mr_rule(self):
        v = detect([0], "mr", np.array([[1.0, 0.0]]), np.zeros((1, 2)), mr=MrConfig(0.9))
        assert v[0].is_dangling and math.isclose(v[0].nn_distance, 1.0)

    def test_br_mean_threshold(self):
        src = np.array([[0.2], [0.4], [0.9]])
        v = detect([0, 1, 2], "br", src, np.zeros((1, 1)))
        assert math.isclose(v[0].threshold, 0.5)
        assert [x.is_dangling for x in v] == [False, False, True]

    def test_nnc_tie_is_matchable(self):
        v = detect([0], "nnc", np.ones((1, 2)), np.zeros((1, 2)), nnc=_zero_nnc(2, 2))
        assert v[0].confidence == 0.5 and not v[0].is_dangling

    def test_unknown_technique(self):
        with pytest.raises(ValueError):
            detect([0], "xyz", np.ones((1, 2)), np.ones((1, 2)))

    def test_csv_roundtrip(self, tmp_path):
        src = np.array([[0.2], [0.4], [0.9]])
        v = detect([0, 1, 2], "br", src, np.zeros((1, 1)))
        names = ["e0", "e1", "e2"]
        write_verdicts(tmp_path / "v.csv", v, names)
        back = read_verdicts(tmp_path / "v.csv", names.index)
        assert back == v
