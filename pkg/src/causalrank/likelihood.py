"""Binary outcome -> continuous likelihood score.

A class-weighted MLP classifier is trained only until it reaches the target
training accuracy; its sigmoid outputs replace the discrete label, and
misclassified samples are dropped before structure discovery.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .data import LIKELIHOOD_COLUMN, ColumnSchema, Dataset
from .errors import ConvergenceError, DegenerateLabelsError, EmptyCohortError, ShapeError
from .mlp import Adam, MlpParams, backward, forward, init_mlp, sigmoid

log = logging.getLogger(__name__)

EPS = 1e-7


@dataclass(frozen=True)
class LikelihoodConfig:
    learning_rate: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 500
    accuracy_target: float = 0.90
    hidden: tuple = (64, 32, 16, 8)


@dataclass(frozen=True)
class LikelihoodResult:
    scores: np.ndarray
    kept_indices: np.ndarray
    w0: float
    w1: float
    train_accuracy: float
    epochs: int


def class_weights(labels) -> tuple[float, float]:
    """Balanced weights ``B / (2 * B_c)`` so both classes carry equal mass."""
    y = np.asarray(labels)
    n = y.size
    n1 = int(np.count_nonzero(y == 1))
    n0 = n - n1
    if n0 == 0 or n1 == 0:
        raise DegenerateLabelsError("both classes must be present to weight them")
    return n / (2.0 * n0), n / (2.0 * n1)


def weighted_bce(y, yhat, w0, w1) -> float:
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.shape != yhat.shape:
        raise ShapeError(f"label shape {y.shape} != prediction shape {yhat.shape}")
    p = np.clip(yhat, EPS, 1.0 - EPS)
    return float(-np.mean(w1 * y * np.log(p) + w0 * (1.0 - y) * np.log(1.0 - p)))


def bce_loss_and_grads(params: MlpParams, X, y, w0, w1):
    """Weighted BCE of ``sigmoid(MLP(X))`` and its gradient for every layer.

    The gradient is taken through the logit, which is exact whenever the
    clamp in :func:`weighted_bce` is inactive.
    """
    y = np.asarray(y, dtype=float)
    logits, cache = forward(params, X)
    p = sigmoid(logits[:, 0])
    loss = weighted_bce(y, p, w0, w1)
    dz = (w0 * (1.0 - y) * p - w1 * y * (1.0 - p)) / y.size
    return loss, backward(params, cache, dz[:, None])


def predict_scores(params: MlpParams, X) -> np.ndarray:
    logits, _ = forward(params, X)
    return np.clip(sigmoid(logits[:, 0]), EPS, 1.0 - EPS)


def _accuracy(scores, y):
    return float(np.mean((scores >= 0.5) == (y == 1)))


def train_likelihood_mlp(ds: Dataset, cfg: LikelihoodConfig | None = None, seed: int = 0):
    """Train until full-train accuracy reaches ``cfg.accuracy_target``.

    Returns ``(params, LikelihoodResult)``. Raises :class:`ConvergenceError`
    with the best accuracy seen if the epoch cap is hit first.
    """
    cfg = cfg or LikelihoodConfig()
    X = np.asarray(ds.values, dtype=float)
    y = np.asarray(ds.target)
    w0, w1 = class_weights(y)
    rng = np.random.default_rng(seed)
    sizes = [X.shape[1], *cfg.hidden, 1]
    params = init_mlp(sizes, ["relu"] * len(cfg.hidden) + ["identity"], rng)
    flat = [a for layer in params.layers for a in layer]
    opt = Adam(flat, lr=cfg.learning_rate)

    best = 0.0
    n = X.shape[0]
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            _, grads = bce_loss_and_grads(params, X[idx], y[idx], w0, w1)
            opt.step([g for pair in grads for g in pair])
        scores = predict_scores(params, X)
        acc = _accuracy(scores, y)
        best = max(best, acc)
        if acc >= cfg.accuracy_target:
            log.info("likelihood MLP reached accuracy %.4f at epoch %d", acc, epoch)
            kept = filter_correct(scores, y)
            return params, LikelihoodResult(scores, kept, w0, w1, acc, epoch)
    raise ConvergenceError(
        f"likelihood MLP stuck at accuracy {best:.4f} < {cfg.accuracy_target} "
        f"after {cfg.max_epochs} epochs",
        best=best,
    )


def filter_correct(scores, labels) -> np.ndarray:
    """Indices whose 0.5-thresholded score agrees with the label."""
    s = np.asarray(scores)
    y = np.asarray(labels)
    if s.shape != y.shape:
        raise ShapeError("scores and labels differ in length")
    ok = ((s >= 0.5) & (y == 1)) | ((s < 0.5) & (y == 0))
    return np.flatnonzero(ok)


def augment_with_likelihood(ds: Dataset, res: LikelihoodResult, standardize_score=False) -> Dataset:
    """Correctly classified rows with the likelihood score appended as a column.

    The target vector is restricted alongside (the importance models still
    need it) but is never part of ``values``.
    """
    kept = np.asarray(res.kept_indices, dtype=np.int64)
    if kept.size == 0:
        raise EmptyCohortError("no correctly classified samples to keep")
    score = np.asarray(res.scores)[kept]
    if standardize_score:
        score = (score - score.mean()) / score.std()
    values = np.column_stack([ds.values[kept], score])
    schema = tuple(ds.schema) + (ColumnSchema(LIKELIHOOD_COLUMN, "continuous"),)
    return ds.replace(
        schema=schema,
        columns=ds.columns + (LIKELIHOOD_COLUMN,),
        kinds=ds.kinds + ("continuous",),
        values=values,
        target=ds.target[kept],
    )
