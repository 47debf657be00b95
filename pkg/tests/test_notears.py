import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from causalrank.errors import ShapeError, ValidationError
from causalrank.mlp import MlpParams
from causalrank.notears import (
    NotearsConfig,
    RegressorBank,
    acyclicity,
    acyclicity_gradient,
    aggregate_adjacency,
    dag_penalty,
    fit_notears_mlp,
    is_acyclic,
    mlp_forward,
    total_loss,
)

from gradcheck import notears_gradient_error, numeric_grad, relative_error

H_CYCLE = 2 * math.cosh(1) - 2


def taylor_expm(A, terms=30):
    out = np.eye(A.shape[0])
    term = np.eye(A.shape[0])
    for k in range(1, terms):
        term = term @ A / k
        out = out + term
    return out


def bank_with_first_layer(w1, hidden_out=None, activation="sigmoid"):
    n, _, d = w1.shape
    w2 = np.ones((n, d, 1)) if hidden_out is None else hidden_out
    return RegressorBank([w1, w2], [np.zeros((n, d)), np.zeros((n, 1))], activation)


class TestMlpForward:
    def test_zero_weights_give_bias(self):
        p = MlpParams(
            [(np.zeros((3, 4)), np.zeros(4)), (np.zeros((4, 1)), np.array([0.7]))], ["sigmoid", "identity"]
        )
        np.testing.assert_array_equal(mlp_forward(p, np.ones((5, 3))), np.full(5, 0.7))

    def test_dot_product(self):
        p = MlpParams([(np.array([[1.0], [1.0]]), np.zeros(1))], ["identity"])
        assert mlp_forward(p, np.array([[2.0, 3.0]]))[0] == 5.0

    def test_shape_mismatch(self):
        p = MlpParams([(np.ones((2, 1)), np.zeros(1))], ["identity"])
        with pytest.raises(ShapeError):
            mlp_forward(p, np.ones((3, 4)))

    def test_bank_matches_single_models(self):
        rng = np.random.default_rng(0)
        bank = RegressorBank.init(4, (3, 2), rng, scale=1.0)
        X = rng.normal(size=(7, 4))
        per_model = np.column_stack([mlp_forward(m, X) for m in bank.models])
        np.testing.assert_allclose(bank.predict(X), per_model, atol=1e-13)
        back = RegressorBank.from_models(bank.models)
        np.testing.assert_array_equal(back.weights[0], bank.weights[0])

    def test_self_input_must_be_zero(self):
        w1 = np.ones((2, 2, 1))
        with pytest.raises(ValidationError):
            bank_with_first_layer(w1)


class TestAggregate:
    def test_scalar_units(self):
        w1 = np.zeros((2, 2, 1))
        w1[1, 0, 0] = -0.7
        W = aggregate_adjacency(bank_with_first_layer(w1))
        # regressor 1 reading input 0 is the edge 0 -> 1
        np.testing.assert_array_equal(W, [[0, 0.7], [0, 0]])

    def test_three_four_five(self):
        w1 = np.zeros((2, 2, 2))
        w1[1, 0] = [3.0, 4.0]
        assert aggregate_adjacency(bank_with_first_layer(w1))[0, 1] == 5.0

    def test_zero_bank(self):
        np.testing.assert_array_equal(aggregate_adjacency(bank_with_first_layer(np.zeros((3, 3, 2)))), 0.0)

    def test_ignores_deeper_layers(self):
        rng = np.random.default_rng(1)
        bank = RegressorBank.init(3, (4,), rng)
        other = bank.copy()
        other.weights[1][:] = rng.normal(size=other.weights[1].shape)
        np.testing.assert_array_equal(aggregate_adjacency(bank), aggregate_adjacency(other))


class TestAcyclicity:
    def test_zero(self):
        for n in (1, 3, 6):
            assert acyclicity(np.zeros((n, n))) == 0.0

    def test_closed_forms(self):
        assert abs(acyclicity([[0, 1], [0, 0]])) < 1e-9
        assert acyclicity([[0, 1], [1, 0]]) == pytest.approx(H_CYCLE, abs=1e-9)

    def test_non_square(self):
        with pytest.raises(ShapeError):
            acyclicity(np.zeros((2, 3)))

    @given(st.integers(0, 2**31), st.integers(2, 7))
    def test_triangular_is_zero(self, seed, n):
        rng = np.random.default_rng(seed)
        W = np.triu(rng.uniform(-2, 2, (n, n)), k=1)
        perm = rng.permutation(n)
        assert abs(acyclicity(W[np.ix_(perm, perm)])) < 1e-9

    @given(st.integers(0, 2**31), st.floats(0.5, 3.0), st.floats(0.5, 3.0))
    def test_two_cycle_positive(self, seed, a, b):
        rng = np.random.default_rng(seed)
        W = np.triu(rng.uniform(0, 1, (4, 4)), k=1)
        W[0, 2], W[2, 0] = a, b
        assert acyclicity(W) > 1e-3

    @given(st.integers(0, 2**31))
    def test_expm_matches_taylor(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 6))
        W = rng.normal(size=(n, n))
        A = W * W
        A *= 2.0 / max(np.linalg.norm(A, 2), 1e-12) * rng.uniform(0.1, 1.0)
        W = np.sqrt(A)
        expected = np.trace(taylor_expm(A)) - n
        assert acyclicity(W) == pytest.approx(expected, abs=1e-9)


class TestAcyclicityGradient:
    def test_zero_point(self):
        np.testing.assert_array_equal(acyclicity_gradient(np.zeros((3, 3))), 0.0)

    @pytest.mark.parametrize("seed", range(5))
    def test_finite_difference(self, seed):
        W = np.random.default_rng(seed).uniform(-1, 1, (4, 4))
        numeric = numeric_grad(lambda t: acyclicity(t.reshape(4, 4)), W.ravel(), step=1e-6).reshape(4, 4)
        assert relative_error(acyclicity_gradient(W), numeric) < 1e-5

    def test_zero_diagonal_stays_zero(self):
        W = np.random.default_rng(3).uniform(-1, 1, (4, 4))
        np.fill_diagonal(W, 0.0)
        g = acyclicity_gradient(W)
        assert np.all(np.isfinite(g))
        np.testing.assert_array_equal(np.diag(g), 0.0)


class TestPenaltyAndLoss:
    def test_acyclic_penalty_zero(self):
        assert dag_penalty(np.array([[0, 2.0], [0, 0]]), 3.0, 7.0) == pytest.approx(0.0, abs=1e-12)

    def test_plugged_closed_form(self):
        assert dag_penalty([[0, 1], [1, 0]], 1.0, 2.0) == pytest.approx(H_CYCLE + H_CYCLE ** 2, abs=1e-9)
        assert dag_penalty([[0, 1], [1, 0]], 1.0, 2.0) == pytest.approx(2.2659, abs=1e-4)

    def test_zero_coefficients(self):
        assert dag_penalty(np.ones((3, 3)), 0.0, 0.0) == 0.0

    def test_zero_bank_reconstruction(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(50, 3))
        X = (X - X.mean(0)) / X.std(0)
        bank = bank_with_first_layer(np.zeros((3, 3, 2)), hidden_out=np.zeros((3, 2, 1)))
        assert total_loss(bank, X, 5.0, 5.0, 0.3) == pytest.approx(np.sum(X ** 2) / 3, rel=1e-12)

    def test_exact_fit_linear_sem(self):
        rng = np.random.default_rng(1)
        B = np.array([[0, 1.5, 0], [0, 0, -0.8], [0, 0, 0]])
        E = rng.uniform(-1, 1, (200, 3))
        X = E @ np.linalg.inv(np.eye(3) - B)
        w1 = B.T[:, :, None].copy()
        bank = bank_with_first_layer(w1, activation="identity")
        np.testing.assert_allclose(bank.predict(X), X @ B, atol=1e-12)
        assert total_loss(bank, X, 1.0, 1.0, 0.0) == pytest.approx(np.sum(E ** 2) / 3, rel=1e-9)

    def test_l1_term(self):
        w1 = np.zeros((2, 2, 1))
        w1[0, 1, 0] = -0.5
        bank = bank_with_first_layer(w1, hidden_out=np.zeros((2, 1, 1)), activation="identity")
        X = np.zeros((4, 2))
        assert total_loss(bank, X, 0.0, 0.0, 2.0) == pytest.approx(1.0)

    @pytest.mark.parametrize("seed", range(10))
    def test_gradient(self, seed):
        assert notears_gradient_error(seed) < 1e-4


class TestIsAcyclic:
    def test_cases(self):
        assert is_acyclic(np.zeros((3, 3)))
        assert is_acyclic([[0, 1, 1], [0, 0, 1], [0, 0, 0]])
        assert not is_acyclic([[0, 1, 0], [0, 0, 1], [1, 0, 0]])
        assert not is_acyclic([[1.0]])


class TestFit:
    def test_independent_columns_empty(self):
        X = np.random.default_rng(0).uniform(-1, 1, (500, 2))
        g = fit_notears_mlp((X - X.mean(0)) / X.std(0), seed=0)
        np.testing.assert_array_equal(g.W, 0.0)

    def test_deterministic(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=300)
        X = np.column_stack([x, np.tanh(2 * x) + 0.3 * rng.normal(size=300), rng.normal(size=300)])
        cfg = NotearsConfig(max_inner_iter=30)
        a = fit_notears_mlp(X, cfg, seed=3)
        b = fit_notears_mlp(X, cfg, seed=3)
        np.testing.assert_array_equal(a.W, b.W)
        np.testing.assert_array_equal(a.raw, b.raw)

    def test_loss_non_increasing_and_mask(self):
        rng = np.random.default_rng(2)
        x = rng.uniform(-2, 2, 300)
        X = np.column_stack([x, np.sin(x) + 0.2 * rng.normal(size=300), rng.normal(size=300)])
        traces = []
        g = fit_notears_mlp(X, NotearsConfig(max_inner_iter=50), seed=0, callback=lambda s, info: traces.append(info))
        assert traces
        for info in traces:
            t = np.asarray(info["trace"])
            assert np.all(np.diff(t) <= 1e-10 * np.maximum(1.0, np.abs(t[:-1])))
        np.testing.assert_array_equal(np.diag(g.raw), 0.0)
        assert is_acyclic(g.W)
        assert traces[-1]["h"] <= 1e-8

    def test_threshold_raised_until_acyclic(self):
        from causalrank.notears import _threshold

        W = np.array([[0, 0.5, 0], [0, 0, 0.4], [0.35, 0, 0]])
        Wt, omega = _threshold(W, 0.3)
        assert omega == pytest.approx(0.36)
        assert is_acyclic(Wt)

    def test_json(self):
        X = np.random.default_rng(4).normal(size=(100, 2))
        d = fit_notears_mlp(X, NotearsConfig(max_inner_iter=10), names=("a", "b")).to_json()
        assert set(d) == {"names", "W", "omega"}

    def test_needs_more_rows(self):
        with pytest.raises(ValidationError):
            fit_notears_mlp(np.zeros((3, 3)))
