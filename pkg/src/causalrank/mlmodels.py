"""Classifier feature importance: gradient-boosted trees and logistic regression.

Both are small numpy implementations so the tree structure and the split
gains behind the importance scores are inspectable.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .data import LIKELIHOOD_COLUMN, Dataset
from .errors import DegenerateLabelsError, ValidationError
from .mlp import sigmoid

log = logging.getLogger(__name__)

_P_CLIP = 1e-12
_MIN_GAIN = 1e-12


@dataclass(frozen=True)
class GbtConfig:
    n_trees: int = 100
    max_depth: int = 3
    learning_rate: float = 0.1
    min_samples_leaf: int = 5


@dataclass(frozen=True)
class LogregConfig:
    penalty: float = 1.0
    tol: float = 1e-6
    max_iter: int = 100


@dataclass
class Tree:
    """Flat node arrays; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return self.value[node]
            rows = np.flatnonzero(inner)
            go_left = X[rows, f[rows]] <= self.threshold[node[rows]]
            node[rows] = np.where(go_left, self.left[node[rows]], self.right[node[rows]])

    @property
    def n_splits(self) -> int:
        return int(np.count_nonzero(self.feature >= 0))


@dataclass
class GbtModel:
    trees: list
    learning_rate: float
    base_score: float
    n_features: int

    def decision_function(self, X) -> np.ndarray:
        out = np.full(np.asarray(X).shape[0], self.base_score)
        for tree in self.trees:
            out += self.learning_rate * tree.predict(X)
        return out

    def predict_proba(self, X) -> np.ndarray:
        return sigmoid(self.decision_function(X))


def _best_split(X, r, min_leaf):
    """Best squared-error split of residuals ``r`` over all features."""
    n, p = X.shape
    if n < 2 * min_leaf:
        return None
    order = np.argsort(X, axis=0, kind="stable")
    xs = np.take_along_axis(X, order, axis=0)
    cs = np.cumsum(r[order], axis=0)
    total = cs[-1]
    n_left = np.arange(1, n)[:, None].astype(float)
    s_left = cs[:-1]
    gain = s_left ** 2 / n_left + (total - s_left) ** 2 / (n - n_left) - total ** 2 / n
    valid = xs[:-1] < xs[1:]
    valid[: min_leaf - 1] = False
    valid[n - min_leaf:] = False
    gain = np.where(valid, gain, -np.inf)
    flat = int(np.argmax(gain))
    i, f = divmod(flat, p)
    if not gain[i, f] > _MIN_GAIN:
        return None
    return f, 0.5 * (xs[i, f] + xs[i + 1, f]), float(gain[i, f])


def _grow_tree(X, r, hess, cfg: GbtConfig) -> Tree:
    feature, threshold, left, right, value, gain = [], [], [], [], [], []

    def leaf_value(idx):
        h = hess[idx].sum()
        return float(r[idx].sum() / h) if h > 0 else 0.0

    def build(idx, depth):
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(leaf_value(idx))
        gain.append(0.0)
        if depth >= cfg.max_depth:
            return node
        split = _best_split(X[idx], r[idx], cfg.min_samples_leaf)
        if split is None:
            return node
        f, t, g = split
        mask = X[idx, f] <= t
        feature[node], threshold[node], gain[node] = f, t, g
        left[node] = build(idx[mask], depth + 1)
        right[node] = build(idx[~mask], depth + 1)
        return node

    build(np.arange(X.shape[0]), 0)
    return Tree(
        np.array(feature, dtype=np.int64),
        np.array(threshold),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(value),
        np.array(gain),
    )


def fit_gbt(X, y, cfg: GbtConfig | None = None) -> GbtModel:
    """Logistic-loss boosting: each tree fits the negative gradient ``y - p``.

    Leaves take a one-step Newton value ``sum(r) / sum(p(1-p))``.
    """
    cfg = cfg or GbtConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    prior = float(np.clip(y.mean(), _P_CLIP, 1.0 - _P_CLIP))
    base = float(np.log(prior / (1.0 - prior)))
    f = np.full(y.size, base)
    trees = []
    for _ in range(cfg.n_trees):
        p = sigmoid(f)
        tree = _grow_tree(X, y - p, p * (1.0 - p), cfg)
        trees.append(tree)
        f += cfg.learning_rate * tree.predict(X)
    return GbtModel(trees, cfg.learning_rate, base, X.shape[1])


def gbt_importance(model: GbtModel) -> np.ndarray:
    """Split gain summed per feature, normalized to 1 when any split exists."""
    imp = np.zeros(model.n_features)
    for tree in model.trees:
        inner = tree.feature >= 0
        np.add.at(imp, tree.feature[inner], tree.gain[inner])
    total = imp.sum()
    return imp / total if total > 0 else imp


@dataclass
class LogregResult:
    coef: np.ndarray
    intercept: float
    separated: bool
    n_iter: int
    loss_trace: list = field(default_factory=list)

    @property
    def importance(self) -> np.ndarray:
        return np.abs(self.coef)


def _logreg_loss(X, y, beta, b0, penalty):
    z = X @ beta + b0
    # log(1 + e^z) - y z
    return float(np.sum(np.logaddexp(0.0, z) - y * z) + 0.5 * penalty * beta @ beta)


def fit_logreg(X, y, cfg: LogregConfig | None = None) -> LogregResult:
    """L2-penalized logistic regression by damped Newton steps (intercept unpenalized)."""
    cfg = cfg or LogregConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if not (0 < y.sum() < y.size):
        raise DegenerateLabelsError("logistic regression needs both classes")
    n, p = X.shape
    Xa = np.column_stack([np.ones(n), X])
    theta = np.zeros(p + 1)
    reg = np.full(p + 1, cfg.penalty)
    reg[0] = 0.0
    loss = _logreg_loss(X, y, theta[1:], theta[0], cfg.penalty)
    trace = [loss]
    it = 0
    for it in range(1, cfg.max_iter + 1):
        mu = sigmoid(Xa @ theta)
        grad = Xa.T @ (mu - y) + reg * theta
        if np.linalg.norm(grad) < cfg.tol:
            break
        hess = (Xa * (mu * (1.0 - mu))[:, None]).T @ Xa + np.diag(reg)
        hess[0, 0] += 1e-12
        step = np.linalg.solve(hess, grad)
        t = 1.0
        while True:
            cand = theta - t * step
            new = _logreg_loss(X, y, cand[1:], cand[0], cfg.penalty)
            if new <= loss or t < 1e-10:
                break
            t *= 0.5
        if new > loss:
            break
        theta, loss = cand, new
        trace.append(loss)
    z = Xa @ theta
    separated = bool(z[y == 1].min() > z[y == 0].max())
    if separated:
        log.warning("classes perfectly separated; coefficients bounded only by the L2 penalty")
    return LogregResult(theta[1:].copy(), float(theta[0]), separated, it, trace)


@dataclass(frozen=True)
class ImportanceResult:
    names: tuple
    scores: np.ndarray
    model_kind: str
    folds: int
    per_fit: np.ndarray = field(repr=False, default=None)


def stratified_halves(y, rng) -> tuple[np.ndarray, np.ndarray]:
    """Random two-way split keeping each class's share (to within one sample)."""
    y = np.asarray(y)
    halves = ([], [])
    offset = 0
    for cls in (0, 1):
        idx = rng.permutation(np.flatnonzero(y == cls))
        for k, i in enumerate(idx):
            halves[(k + offset) % 2].append(i)
        offset += len(idx)
    return np.sort(np.array(halves[0], dtype=np.int64)), np.sort(np.array(halves[1], dtype=np.int64))


def _importance(kind, X, y, gbt_cfg, lr_cfg):
    if kind == "gbt":
        return gbt_importance(fit_gbt(X, y, gbt_cfg))
    if kind == "logreg":
        return fit_logreg(X, y, lr_cfg).importance
    raise ValidationError(f"unknown importance model {kind!r}")


def cross_validated_importance(
    ds: Dataset, model_kind: str, seed: int = 0, repeats: int = 10, gbt_cfg=None, lr_cfg=None
) -> ImportanceResult:
    """Average importance over ``repeats`` stratified 2-fold splits (2 fits each)."""
    keep = [i for i, c in enumerate(ds.columns) if c != LIKELIHOOD_COLUMN]
    X = np.asarray(ds.values)[:, keep]
    y = np.asarray(ds.target)
    names = tuple(ds.columns[i] for i in keep)
    rng = np.random.default_rng(seed)
    fits = []
    for _ in range(repeats):
        for _attempt in range(20):
            halves = stratified_halves(y, rng)
            if all(0 < y[h].sum() < h.size for h in halves):
                break
        else:
            raise DegenerateLabelsError("could not draw a 2-fold split with both classes in each fold")
        for h in halves:
            fits.append(_importance(model_kind, X[h], y[h], gbt_cfg, lr_cfg))
    per_fit = np.array(fits)
    return ImportanceResult(names, per_fit.mean(axis=0), model_kind, len(fits), per_fit)
