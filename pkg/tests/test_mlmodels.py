import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from causalrank.data import LIKELIHOOD_COLUMN, ColumnSchema
from causalrank.errors import DegenerateLabelsError
from causalrank.mlmodels import (
    GbtConfig,
    LogregConfig,
    cross_validated_importance,
    fit_gbt,
    fit_logreg,
    gbt_importance,
    stratified_halves,
)

from conftest import make_dataset


def single_driver(B, n_noise=4, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(B, n_noise + 1))
    return X, (X[:, 0] > 0).astype(int)


class TestLogreg:
    def test_driver_largest(self):
        X, y = single_driver(2000)
        res = fit_logreg(X, y)
        assert int(np.argmax(res.importance)) == 0

    def test_duplicated_column_shares_weight(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=2000)
        y = (rng.random(2000) < 1 / (1 + np.exp(-1.5 * x))).astype(int)
        single = fit_logreg(x[:, None], y).coef[0]
        dup = fit_logreg(np.column_stack([x, x]), y).coef
        assert np.all(np.isfinite(dup))
        assert dup[0] == pytest.approx(dup[1], rel=1e-8)
        assert dup.sum() == pytest.approx(single, rel=0.02)

    def test_independent_labels_small(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(2000, 5))
        y = rng.integers(0, 2, 2000)
        assert np.all(fit_logreg(X, y, LogregConfig(penalty=1.0)).importance < 0.1)

    def test_separation_flagged(self):
        x = np.array([-3.0, -2.0, -1.0, 1.0, 2.0, 3.0])
        res = fit_logreg(x[:, None], (x > 0).astype(int))
        assert res.separated
        assert np.isfinite(res.coef).all()

    def test_loss_monotone(self):
        X, y = single_driver(500, seed=3)
        trace = np.array(fit_logreg(X, y).loss_trace)
        assert np.all(np.diff(trace) <= 0)

    def test_gradient_converged(self):
        X, y = single_driver(500, seed=4)
        cfg = LogregConfig()
        res = fit_logreg(X, y, cfg)
        p = 1 / (1 + np.exp(-(X @ res.coef + res.intercept)))
        grad = np.concatenate([[np.sum(p - y)], X.T @ (p - y) + cfg.penalty * res.coef])
        assert np.linalg.norm(grad) < 1e-6

    def test_single_class(self):
        with pytest.raises(DegenerateLabelsError):
            fit_logreg(np.ones((4, 1)), np.ones(4))


class TestGbt:
    def test_axis_aligned(self):
        X, y = single_driver(500, n_noise=2, seed=5)
        model = fit_gbt(X, y, GbtConfig(n_trees=10, max_depth=1))
        assert np.mean((model.predict_proba(X) >= 0.5) == y) >= 0.98

    def test_constant_target(self):
        X = np.random.default_rng(6).normal(size=(50, 3))
        model = fit_gbt(X, np.ones(50, dtype=int))
        assert all(t.n_splits == 0 for t in model.trees)
        np.testing.assert_allclose(model.predict_proba(X), 1 - 1e-12, atol=1e-9)
        np.testing.assert_array_equal(gbt_importance(model), 0.0)

    def test_xor(self):
        rng = np.random.default_rng(7)
        X = rng.uniform(-1, 1, (600, 2))
        y = ((X[:, 0] > 0) ^ (X[:, 1] > 0)).astype(int)
        deep = fit_gbt(X, y, GbtConfig(n_trees=50, max_depth=2))
        stump = fit_gbt(X, y, GbtConfig(n_trees=50, max_depth=1))
        assert np.mean((deep.predict_proba(X) >= 0.5) == y) >= 0.9
        assert np.mean((stump.predict_proba(X) >= 0.5) == y) < 0.65

    def test_depth_bound(self):
        X, y = single_driver(300, seed=8)
        model = fit_gbt(X, y, GbtConfig(n_trees=5, max_depth=2))
        for tree in model.trees:
            assert tree.feature.size <= 7
            assert np.all(tree.feature < X.shape[1])
            assert np.all(np.isfinite(tree.value))

    def test_importance_concentrated(self):
        X, y = single_driver(500, seed=9)
        imp = gbt_importance(fit_gbt(X, y))
        assert imp[0] >= 0.8
        assert imp.sum() == pytest.approx(1.0)
        assert np.all(imp >= 0)

    def test_never_split_is_zero(self):
        rng = np.random.default_rng(10)
        X = np.column_stack([rng.normal(size=200), np.zeros(200)])
        imp = gbt_importance(fit_gbt(X, (X[:, 0] > 0).astype(int)))
        assert imp[1] == 0.0

    @given(st.integers(0, 2**31), st.sampled_from(["exp", "cube", "affine"]))
    def test_monotone_transform_invariance(self, seed, kind):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(80, 3))
        y = ((X[:, 0] + 0.5 * X[:, 1] ** 2 + rng.normal(0, 0.5, 80)) > 0.5).astype(int)
        f = {"exp": np.exp, "cube": lambda v: v ** 3, "affine": lambda v: 3 * v - 1}[kind]
        Xt = X.copy()
        Xt[:, 1] = f(X[:, 1])
        cfg = GbtConfig(n_trees=10, max_depth=2)
        a = fit_gbt(X, y, cfg).predict_proba(X)
        b = fit_gbt(Xt, y, cfg).predict_proba(Xt)
        np.testing.assert_allclose(a, b, atol=1e-12)


class TestCrossValidation:
    def test_stratified_halves(self):
        y = np.r_[np.zeros(31), np.ones(17)].astype(int)
        a, b = stratified_halves(y, np.random.default_rng(0))
        assert np.intersect1d(a, b).size == 0 and a.size + b.size == 48
        assert abs(y[a].sum() - y[b].sum()) <= 1

    def _dataset(self, seed=0, B=300):
        X, y = single_driver(B, n_noise=3, seed=seed)
        rng = np.random.default_rng(seed + 100)
        ds = make_dataset(X, y)
        score = rng.uniform(0.01, 0.99, B)
        return ds.replace(
            schema=tuple(ds.schema) + (ColumnSchema(LIKELIHOOD_COLUMN, "continuous"),),
            columns=ds.columns + (LIKELIHOOD_COLUMN,),
            kinds=ds.kinds + ("continuous",),
            values=np.column_stack([ds.values, score]),
        )

    @pytest.mark.parametrize("kind", ["gbt", "logreg"])
    def test_shape_and_determinism(self, kind):
        ds = self._dataset()
        a = cross_validated_importance(ds, kind, seed=4, repeats=3, gbt_cfg=GbtConfig(n_trees=10))
        b = cross_validated_importance(ds, kind, seed=4, repeats=3, gbt_cfg=GbtConfig(n_trees=10))
        assert a.names == ("x0", "x1", "x2", "x3")
        assert a.scores.shape == (4,) and a.folds == 6
        assert np.all(np.isfinite(a.scores)) and np.all(a.scores >= 0)
        np.testing.assert_array_equal(a.scores, b.scores)
        np.testing.assert_allclose(a.scores, a.per_fit.mean(axis=0))

    @pytest.mark.parametrize("kind", ["gbt", "logreg"])
    def test_driver_beats_noise_per_repetition(self, kind):
        res = cross_validated_importance(self._dataset(1), kind, seed=0, repeats=10, gbt_cfg=GbtConfig(n_trees=20))
        per_rep = res.per_fit.reshape(10, 2, -1).mean(axis=1)
        wins = np.sum(per_rep[:, 0] > per_rep[:, 1:].max(axis=1))
        assert wins >= 9

    def test_single_class_fold_errors(self):
        ds = make_dataset(np.random.default_rng(0).normal(size=(10, 2)), [1] + [0] * 9)
        with pytest.raises(DegenerateLabelsError):
            cross_validated_importance(ds, "logreg", seed=0, repeats=1)
