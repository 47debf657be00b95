import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from causalrank.data import LIKELIHOOD_COLUMN
from causalrank.errors import ConvergenceError, DegenerateLabelsError, EmptyCohortError, ShapeError
from causalrank.likelihood import (
    EPS,
    LikelihoodConfig,
    LikelihoodResult,
    augment_with_likelihood,
    class_weights,
    filter_correct,
    train_likelihood_mlp,
    weighted_bce,
)
from causalrank.mlp import Adam, MlpParams, forward, init_mlp, mlp_forward, sigmoid

from conftest import make_dataset
from gradcheck import bce_gradient_error


class TestSigmoid:
    def test_extremes_finite(self):
        out = sigmoid(np.array([-1000.0, 0.0, 1000.0]))
        np.testing.assert_array_equal(out, [0.0, 0.5, 1.0])

    def test_symmetry(self):
        z = np.linspace(-30, 30, 601)
        np.testing.assert_allclose(sigmoid(z) + sigmoid(-z), 1.0, atol=1e-15)


class TestMlp:
    def test_dims_must_chain(self):
        with pytest.raises(ShapeError):
            MlpParams([(np.zeros((2, 3)), np.zeros(3)), (np.zeros((4, 1)), np.zeros(1))], ["relu", "identity"])

    def test_forward_matches_manual(self):
        rng = np.random.default_rng(0)
        p = init_mlp([3, 4, 1], ["tanh", "identity"], rng)
        X = rng.normal(size=(5, 3))
        (W1, b1), (W2, b2) = p.layers
        np.testing.assert_allclose(mlp_forward(p, X), (np.tanh(X @ W1 + b1) @ W2 + b2)[:, 0], atol=1e-14)

    def test_flat_round_trip(self):
        p = init_mlp([3, 4, 2, 1], ["relu", "sigmoid", "identity"], np.random.default_rng(1))
        q = p.with_flat(p.flat())
        for (a, b), (c, d) in zip(p.layers, q.layers):
            np.testing.assert_array_equal(a, c)
            np.testing.assert_array_equal(b, d)

    def test_adam_minimizes_quadratic(self):
        x = np.array([3.0, -2.0])
        opt = Adam([x], lr=0.1)
        for _ in range(500):
            opt.step([2 * x])
        np.testing.assert_allclose(x, 0.0, atol=1e-3)


class TestClassWeights:
    def test_balanced(self):
        assert class_weights([0, 1]) == (1.0, 1.0)

    def test_imbalanced(self):
        w0, w1 = class_weights([0, 0, 0, 1])
        assert w0 == pytest.approx(4 / 6)
        assert w1 == 2.0

    def test_single_class(self):
        with pytest.raises(DegenerateLabelsError):
            class_weights([1, 1, 1, 1])

    @given(st.lists(st.integers(0, 1), min_size=2, max_size=60).filter(lambda v: 0 < sum(v) < len(v)))
    def test_equal_mass(self, labels):
        w0, w1 = class_weights(labels)
        n1 = sum(labels)
        assert w0 * (len(labels) - n1) == pytest.approx(w1 * n1, rel=1e-12)


class TestWeightedBce:
    def test_half(self):
        assert weighted_bce([1], [0.5], 1.0, 1.0) == pytest.approx(math.log(2), abs=1e-12)

    def test_unit_weights_reduce_to_bce(self):
        rng = np.random.default_rng(3)
        y = rng.integers(0, 2, 30)
        p = rng.uniform(0.01, 0.99, 30)
        plain = -np.mean(y * np.log(p) + (1 - y) * np.log(1 - p))
        assert weighted_bce(y, p, 1.0, 1.0) == pytest.approx(plain, rel=1e-12)

    def test_perfect_limit(self):
        losses = [weighted_bce([1], [1 - eps], 1.0, 1.0) for eps in (1e-2, 1e-4, 1e-6)]
        assert losses[0] > losses[1] > losses[2]
        assert losses[2] < 1e-5

    def test_clamped_at_boundary(self):
        assert weighted_bce([1], [0.0], 1.0, 1.0) == pytest.approx(-math.log(EPS))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            weighted_bce([1, 0], [0.5], 1.0, 1.0)

    @pytest.mark.parametrize("seed", range(10))
    def test_gradient(self, seed):
        assert bce_gradient_error(seed) < 1e-4


class TestFilterCorrect:
    def test_both_correct(self):
        np.testing.assert_array_equal(filter_correct([0.9, 0.2], [1, 0]), [0, 1])

    def test_both_wrong(self):
        assert filter_correct([0.9, 0.2], [0, 1]).size == 0

    def test_boundary(self):
        np.testing.assert_array_equal(filter_correct([0.5], [1]), [0])

    @given(st.lists(st.tuples(st.floats(0, 1), st.integers(0, 1)), min_size=1, max_size=50))
    def test_kept_agree(self, pairs):
        s = np.array([p for p, _ in pairs])
        y = np.array([l for _, l in pairs])
        kept = filter_correct(s, y)
        assert np.all((s[kept] >= 0.5) == (y[kept] == 1))
        dropped = np.setdiff1d(np.arange(len(pairs)), kept)
        assert np.all((s[dropped] >= 0.5) != (y[dropped] == 1))


class TestTraining:
    def test_separable_blobs(self, blobs):
        params, res = train_likelihood_mlp(blobs, seed=0)
        assert res.train_accuracy >= 0.90
        assert np.all((res.scores > 0) & (res.scores < 1))
        scores = 1 / (1 + np.exp(-forward(params, blobs.values)[0][:, 0]))
        np.testing.assert_allclose(np.clip(scores, EPS, 1 - EPS), res.scores)

    def test_deterministic(self, blobs):
        _, a = train_likelihood_mlp(blobs, seed=5)
        _, b = train_likelihood_mlp(blobs, seed=5)
        np.testing.assert_array_equal(a.scores, b.scores)
        assert a.epochs == b.epochs

    def test_noise_labels_fail(self):
        rng = np.random.default_rng(11)
        X = rng.normal(size=(400, 3))
        y = rng.permutation(np.repeat([0, 1], 200))
        cfg = LikelihoodConfig(max_epochs=3, hidden=(8, 4))
        with pytest.raises(ConvergenceError) as info:
            train_likelihood_mlp(make_dataset(X, y), cfg, seed=0)
        assert 0.4 < info.value.best < 0.9

    def test_stops_at_first_epoch_reaching_target(self, blobs):
        _, res = train_likelihood_mlp(blobs, LikelihoodConfig(accuracy_target=0.5), seed=0)
        assert res.epochs == 1


class TestAugment:
    def _result(self, n, wrong):
        kept = np.setdiff1d(np.arange(n), wrong)
        return LikelihoodResult(np.linspace(0.01, 0.99, n), kept, 1.0, 1.0, 0.93, 3)

    def test_counts(self):
        rng = np.random.default_rng(0)
        ds = make_dataset(rng.normal(size=(100, 4)), rng.integers(0, 2, 100))
        res = self._result(100, np.arange(0, 70, 10))
        out = augment_with_likelihood(ds, res)
        assert (out.row_count, out.var_count) == (93, 5)
        assert out.columns[-1] == LIKELIHOOD_COLUMN
        np.testing.assert_array_equal(out.column(LIKELIHOOD_COLUMN), res.scores[res.kept_indices])
        np.testing.assert_array_equal(out.target, ds.target[res.kept_indices])

    def test_input_untouched(self):
        rng = np.random.default_rng(1)
        ds = make_dataset(rng.normal(size=(10, 2)), rng.integers(0, 2, 10))
        before = ds.values.copy()
        augment_with_likelihood(ds, self._result(10, [1]))
        np.testing.assert_array_equal(ds.values, before)
        assert ds.var_count == 2

    def test_empty(self):
        ds = make_dataset(np.zeros((3, 1)), [0, 1, 0])
        res = LikelihoodResult(np.full(3, 0.5), np.array([], dtype=int), 1.0, 1.0, 0.9, 1)
        with pytest.raises(EmptyCohortError):
            augment_with_likelihood(ds, res)

    def test_standardized_score_switch(self):
        rng = np.random.default_rng(2)
        ds = make_dataset(rng.normal(size=(20, 2)), rng.integers(0, 2, 20))
        out = augment_with_likelihood(ds, self._result(20, [0]), standardize_score=True)
        col = out.column(LIKELIHOOD_COLUMN)
        assert abs(col.mean()) < 1e-12 and abs(col.std() - 1) < 1e-12
