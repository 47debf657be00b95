"""DirectLiNGAM: causal ordering by iterated regression and independence scoring.

At each step the variable whose regression residuals are most independent
of it (lowest summed mutual information) is taken as exogenous, removed,
and every remaining variable is replaced by its residual on it. The
adjacency is then estimated by ordinary least squares on each variable's
predecessors in the order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DegenerateError, ShapeError, ValidationError

log = logging.getLogger(__name__)

# maximum-entropy approximation constants for the log-cosh / Gaussian-moment contrasts
_K1 = 79.047
_K2 = 7.4129
_GAMMA = 0.37457
_H_GAUSS = 0.5 * (1.0 + np.log(2.0 * np.pi))
_GRID = 32
_RIDGE = 1e-8


@dataclass(frozen=True)
class LingamResult:
    order: list
    adjacency: np.ndarray
    names: tuple = ()
    ridge_used: bool = False

    def to_json(self) -> dict:
        return {
            "names": list(self.names),
            "order": [int(i) for i in self.order],
            "adjacency": self.adjacency.tolist(),
        }


@dataclass(frozen=True)
class LingamConfig:
    prune_threshold: float = 0.05


def residual(xi, xj) -> np.ndarray:
    """``xi`` minus its least-squares projection on ``xj``."""
    xi = np.asarray(xi, dtype=float)
    xj = np.asarray(xj, dtype=float)
    if xi.shape != xj.shape or xi.ndim != 1:
        raise ShapeError("residual needs two equal-length vectors")
    if xi.size < 3:
        raise ShapeError("residual needs at least 3 samples")
    dj = xj - xj.mean()
    var = np.mean(dj * dj)
    if not var > 0:
        raise DegenerateError("regressor has zero variance")
    cov = np.mean((xi - xi.mean()) * dj)
    return xi - (cov / var) * xj


def entropy_maxent(u) -> float:
    """Differential entropy of a standardized sample, maximum-entropy approximation."""
    lc = np.logaddexp(u, -u) - np.log(2.0)
    return float(_H_GAUSS - _K1 * (lc.mean() - _GAMMA) ** 2 - _K2 * np.mean(u * np.exp(-0.5 * u * u)) ** 2)


def _standardized(x):
    x = np.asarray(x, dtype=float)
    sd = x.std()
    if not sd > 0:
        raise DegenerateError("constant input to mutual information estimate")
    return (x - x.mean()) / sd


def mi_estimate(u, v) -> float:
    """Pairwise mutual information, nonnegative and symmetric.

    Gaussian part ``-0.5 log(1 - r^2)`` plus a non-Gaussian part: after
    symmetric whitening, the drop in summed marginal entropy achievable by
    rotating the pair. Independent components are already at the minimum,
    so that drop is ~0 for them.
    """
    u = _standardized(u)
    v = _standardized(v)
    if u.shape != v.shape:
        raise ShapeError("mi_estimate needs equal-length vectors")
    # fixed argument order makes the estimate exactly symmetric
    if u.tobytes() > v.tobytes():
        u, v = v, u
    r = float(np.clip(np.mean(u * v), -1.0 + 1e-12, 1.0 - 1e-12))
    gauss = -0.5 * np.log1p(-r * r)
    sp, sm = 1.0 / np.sqrt(1.0 + r), 1.0 / np.sqrt(1.0 - r)
    a, b = 0.5 * (sp + sm), 0.5 * (sp - sm)
    z1 = a * u + b * v
    z2 = b * u + a * v

    def summed(theta):
        c, s = np.cos(theta), np.sin(theta)
        return entropy_maxent(c * z1 + s * z2) + entropy_maxent(c * z2 - s * z1)

    step = 0.5 * np.pi / _GRID
    grid = np.arange(_GRID) * step
    vals = [summed(t) for t in grid]
    k = int(np.argmin(vals))
    refined = minimize_scalar(
        summed, bounds=(grid[k] - step, grid[k] + step), method="bounded", options={"xatol": 1e-4}
    )
    best = min(vals[k], float(refined.fun))
    return float(gauss + max(0.0, vals[0] - best))


def select_exogenous(X, active) -> int:
    """Index in ``active`` whose residuals carry the least summed MI with it."""
    X = np.asarray(X, dtype=float)
    active = sorted(int(i) for i in active)
    if len(active) < 2:
        raise ValidationError("select_exogenous needs at least two active variables")
    best, best_score = None, np.inf
    for j in active:
        xj = X[:, j]
        score = 0.0
        for i in active:
            if i != j:
                score += mi_estimate(residual(X[:, i], xj), xj)
        if score < best_score:
            best, best_score = j, score
    return best


def causal_order(X) -> list:
    X = np.array(X, dtype=float)
    if X.ndim != 2:
        raise ShapeError("expected a samples x variables matrix")
    n_samples, n_vars = X.shape
    if n_vars < 2:
        raise ValidationError("need at least two variables")
    if n_samples <= n_vars:
        raise ValidationError("need more samples than variables")
    active = list(range(n_vars))
    order = []
    while len(active) > 1:
        j = select_exogenous(X, active)
        order.append(j)
        active.remove(j)
        for i in active:
            X[:, i] = residual(X[:, i], X[:, j])
    order.extend(active)
    return order


def _validate_order(order, n):
    if sorted(int(i) for i in order) != list(range(n)):
        raise ValidationError(f"order {order} is not a permutation of 0..{n - 1}")


def estimate_adjacency(X, order, prune_threshold=0.05, names=()) -> LingamResult:
    """OLS of every variable on its predecessors; ``adjacency[i, j]`` is i -> j."""
    X = np.asarray(X, dtype=float)
    n = X.shape[1]
    _validate_order(order, n)
    Xc = X - X.mean(axis=0)
    A = np.zeros((n, n))
    ridge_used = False
    for pos in range(1, n):
        target, preds = order[pos], list(order[:pos])
        P = Xc[:, preds]
        gram = P.T @ P
        if np.linalg.matrix_rank(gram) < len(preds):
            gram = gram + _RIDGE * np.eye(len(preds))
            ridge_used = True
            log.warning("rank-deficient predecessors for variable %d; ridge fallback", target)
        coef = np.linalg.solve(gram, P.T @ Xc[:, target])
        coef[np.abs(coef) < prune_threshold] = 0.0
        A[preds, target] = coef
    return LingamResult([int(i) for i in order], A, tuple(names), ridge_used)


def fit_lingam(X, cfg: LingamConfig | None = None, names=()) -> LingamResult:
    cfg = cfg or LingamConfig()
    order = causal_order(X)
    return estimate_adjacency(X, order, cfg.prune_threshold, names)
