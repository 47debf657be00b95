"""NOTEARS-MLP: nonlinear structure learning under a smooth acyclicity constraint.

One MLP per variable reconstructs that variable from all the others; the
norm of each regressor's first-layer weights per input gives a weighted
adjacency, and ``h(W) = tr(exp(W * W)) - N`` is driven to zero with an
augmented Lagrangian.

The bank stores all N regressors as stacked arrays so batched matrix
products evaluate every model at once: first-layer weights have shape ``(N, N, D)`` indexed
``[target j, input k, unit d]``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as slin
import scipy.optimize as sopt

from .errors import ConvergenceError, ShapeError, ValidationError
from .mlp import _ACT, MlpParams, mlp_forward

log = logging.getLogger(__name__)

__all__ = [
    "NotearsConfig",
    "RegressorBank",
    "WeightedDigraph",
    "acyclicity",
    "acyclicity_gradient",
    "aggregate_adjacency",
    "dag_penalty",
    "fit_notears_mlp",
    "is_acyclic",
    "mlp_forward",
    "total_loss",
    "total_loss_and_grad",
]


@dataclass(frozen=True)
class NotearsConfig:
    hidden: tuple = (10,)
    activation: str = "sigmoid"
    lambda1: float = 0.01
    lambda2: float = 0.01
    max_inner_iter: int = 100
    max_outer_iter: int = 100
    h_tol: float = 1e-8
    rho_max: float = 1e16
    rho_growth: float = 10.0
    progress: float = 0.25
    omega: float = 0.3
    init_scale: float = 0.1


@dataclass
class RegressorBank:
    """Stacked per-target regressors.

    ``weights[0]`` is ``(N, N, D)``; deeper layers are ``(N, d_l, d_{l+1})``;
    ``biases[l]`` is ``(N, d_{l+1})``. The final layer is linear with width 1.
    """

    weights: list
    biases: list
    activation: str = "sigmoid"

    def __post_init__(self):
        w1 = self.weights[0]
        if w1.ndim != 3 or w1.shape[0] != w1.shape[1]:
            raise ShapeError(f"first layer must be (N, N, D), got {w1.shape}")
        if self.weights[-1].shape[-1] != 1:
            raise ShapeError("output layer must have width 1")
        idx = np.arange(w1.shape[0])
        if np.any(w1[idx, idx, :] != 0):
            raise ValidationError("regressor j must carry zero weight on its own input")

    @property
    def n_vars(self) -> int:
        return self.weights[0].shape[0]

    @property
    def activations(self) -> list:
        return [self.activation] * (len(self.weights) - 1) + ["identity"]

    @property
    def models(self) -> list:
        return [
            MlpParams([(w[j], b[j]) for w, b in zip(self.weights, self.biases)], self.activations)
            for j in range(self.n_vars)
        ]

    @classmethod
    def from_models(cls, models) -> "RegressorBank":
        act = models[0].activations[0] if len(models[0].layers) > 1 else "sigmoid"
        weights = [np.stack([m.layers[l][0] for m in models]) for l in range(len(models[0].layers))]
        biases = [np.stack([m.layers[l][1] for m in models]) for l in range(len(models[0].layers))]
        return cls(weights, biases, act)

    @classmethod
    def init(cls, n_vars, hidden=(10,), rng=None, activation="sigmoid", scale=0.1) -> "RegressorBank":
        rng = rng if rng is not None else np.random.default_rng(0)
        sizes = [n_vars, *hidden, 1]
        weights, biases = [], []
        for l, (d_in, d_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            if l == 0:
                w = rng.uniform(-scale, scale, size=(n_vars, d_in, d_out))
                w[np.arange(n_vars), np.arange(n_vars), :] = 0.0
            else:
                bound = np.sqrt(6.0 / (d_in + d_out))
                w = rng.uniform(-bound, bound, size=(n_vars, d_in, d_out))
            weights.append(w)
            biases.append(np.zeros((n_vars, d_out)))
        return cls(weights, biases, activation)

    def copy(self) -> "RegressorBank":
        return RegressorBank([w.copy() for w in self.weights], [b.copy() for b in self.biases], self.activation)

    def predict(self, X) -> np.ndarray:
        return _forward(self, np.asarray(X, dtype=float))[0]


@dataclass(frozen=True)
class WeightedDigraph:
    """Thresholded nonnegative adjacency; ``W[k, j]`` is the strength of k -> j."""

    W: np.ndarray
    names: tuple
    omega: float
    raw: np.ndarray = field(default=None, repr=False)
    h: float = 0.0

    def to_json(self) -> dict:
        return {"names": list(self.names), "W": self.W.tolist(), "omega": self.omega}


def _forward(bank: RegressorBank, X):
    if X.ndim != 2 or X.shape[1] != bank.n_vars:
        raise ShapeError(f"input shape {X.shape} does not match bank of {bank.n_vars} variables")
    acts = bank.activations
    cache = []
    n, _, d = bank.weights[0].shape
    # activations are kept target-major: (N, B, d)
    first = bank.weights[0].transpose(1, 0, 2).reshape(n, n * d)
    z = (X @ first).reshape(-1, n, d).transpose(1, 0, 2) + bank.biases[0][:, None, :]
    a = _ACT[acts[0]][0](z)
    cache.append((z, a))
    for w, b, act in zip(bank.weights[1:], bank.biases[1:], acts[1:]):
        z = np.matmul(a, w) + b[:, None, :]
        a = _ACT[act][0](z)
        cache.append((z, a))
    return a[:, :, 0].T, cache


def _backward(bank: RegressorBank, X, cache, d_out):
    acts = bank.activations
    n_layers = len(bank.weights)
    gw = [None] * n_layers
    gb = [None] * n_layers
    n, _, d = bank.weights[0].shape
    delta = d_out.T[:, :, None]
    for l in range(n_layers - 1, -1, -1):
        z, a = cache[l]
        delta = delta * _ACT[acts[l]][1](z, a)
        gb[l] = delta.sum(axis=1)
        if l:
            gw[l] = np.matmul(cache[l - 1][1].transpose(0, 2, 1), delta)
            delta = np.matmul(delta, bank.weights[l].transpose(0, 2, 1))
        else:
            flat = delta.transpose(1, 0, 2).reshape(-1, n * d)
            gw[0] = (X.T @ flat).reshape(n, n, d).transpose(1, 0, 2).copy()
    idx = np.arange(bank.n_vars)
    gw[0][idx, idx, :] = 0.0
    return gw, gb


def aggregate_adjacency(bank: RegressorBank) -> np.ndarray:
    """``W[k, j]`` = L2 norm of regressor j's first-layer weights for input k."""
    return np.sqrt((bank.weights[0] ** 2).sum(axis=-1)).T


def _square(W):
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {W.shape}")
    return W


def acyclicity(W) -> float:
    W = _square(W)
    return float(np.trace(slin.expm(W * W)) - W.shape[0])


def acyclicity_gradient(W) -> np.ndarray:
    W = _square(W)
    return slin.expm(W * W).T * 2.0 * W


def dag_penalty(W, alpha, rho) -> float:
    h = acyclicity(W)
    return alpha * h + 0.5 * rho * h * h


def total_loss(bank: RegressorBank, X, alpha, rho, lam) -> float:
    return total_loss_and_grad(bank, X, alpha, rho, lam, need_grad=False)[0]


def total_loss_and_grad(bank: RegressorBank, X, alpha, rho, lam, lam2=0.0, need_grad=True):
    """Reconstruction + L1 on first-layer weights + augmented-Lagrangian DAG term.

    The reconstruction is ``(1/N) * sum_j ||X_j - Xhat_j||^2`` (summed over
    samples). ``lam2`` adds an optional ``0.5 * lam2 * ||theta||^2`` over
    every weight; it is zero unless the fit config asks for it.

    Returns ``(loss, (weight_grads, bias_grads))``; the L1 term contributes
    its subgradient ``lam * sign(theta)``.
    """
    X = np.asarray(X, dtype=float)
    n = bank.n_vars
    xhat, cache = _forward(bank, X)
    diff = xhat - X
    recon = float(np.sum(diff * diff)) / n
    w1 = bank.weights[0]
    A = (w1 * w1).sum(axis=-1).T
    E = slin.expm(A)
    h = float(np.trace(E) - n)
    loss = recon + lam * float(np.abs(w1).sum()) + alpha * h + 0.5 * rho * h * h
    if lam2:
        loss += 0.5 * lam2 * sum(float(np.sum(w * w)) for w in bank.weights)
    if not need_grad:
        return loss, None
    gw, gb = _backward(bank, X, cache, (2.0 / n) * diff)
    gw[0] = gw[0] + (alpha + rho * h) * 2.0 * E[:, :, None] * w1 + lam * np.sign(w1)
    if lam2:
        gw = [g + lam2 * w for g, w in zip(gw, bank.weights)]
    return loss, (gw, gb)


def is_acyclic(adj) -> bool:
    """Kahn's algorithm on the nonzero support of ``adj``."""
    support = np.asarray(adj) != 0
    indeg = support.sum(axis=0)
    ready = [i for i in range(support.shape[0]) if indeg[i] == 0]
    seen = 0
    while ready:
        k = ready.pop()
        seen += 1
        for j in np.flatnonzero(support[k]):
            indeg[j] -= 1
            if indeg[j] == 0:
                ready.append(j)
    return seen == support.shape[0]


class _Problem:
    """Flat parameter vector for L-BFGS-B.

    First-layer weights are split into nonnegative parts ``theta = p - q``
    so the L1 term is smooth; self-inputs are pinned to zero by bounds.

    The objective is ``total_loss / c`` with ``c = 2B/N`` and every penalty
    weight multiplied by ``c``: the same minimizer, in per-sample units, so
    the dual schedule and tolerances do not depend on the sample count.
    """

    def __init__(self, bank: RegressorBank, X, lam, lam2):
        self.template = bank.copy()
        self.X = X
        self.lam, self.lam2 = lam, lam2
        self.scale = 2.0 * X.shape[0] / X.shape[1]
        self.shapes = [w.shape for w in bank.weights] + [b.shape for b in bank.biases]
        n, _, d = bank.weights[0].shape
        self.n_first = n * n * d
        mask = np.ones((n, n, d), dtype=bool)
        mask[np.arange(n), np.arange(n), :] = False
        free = [(0.0, None) if m else (0.0, 0.0) for m in mask.ravel()]
        rest = sum(int(np.prod(s)) for s in self.shapes[1:])
        self.bounds = free + free + [(None, None)] * rest

    def pack(self, bank: RegressorBank) -> np.ndarray:
        w1 = bank.weights[0].ravel()
        parts = [np.maximum(w1, 0.0), np.maximum(-w1, 0.0)]
        parts += [w.ravel() for w in bank.weights[1:]] + [b.ravel() for b in bank.biases]
        return np.concatenate(parts)

    def unpack(self, x) -> RegressorBank:
        k = self.n_first
        w1 = (x[:k] - x[k:2 * k]).reshape(self.shapes[0])
        arrays, pos = [w1], 2 * k
        for s in self.shapes[1:]:
            size = int(np.prod(s))
            arrays.append(x[pos:pos + size].reshape(s))
            pos += size
        nl = len(self.template.weights)
        return RegressorBank(arrays[:nl], arrays[nl:], self.template.activation)

    def objective(self, x, alpha, rho):
        k, c = self.n_first, self.scale
        bank = self.unpack(x)
        loss, (gw, gb) = total_loss_and_grad(bank, self.X, c * alpha, c * rho, 0.0, c * self.lam2)
        loss = loss / c + self.lam * float(x[:2 * k].sum())
        g1 = gw[0].ravel() / c
        grad = np.concatenate(
            [g1 + self.lam, -g1 + self.lam] + [g.ravel() / c for g in gw[1:]] + [g.ravel() / c for g in gb]
        )
        return loss, grad


def _threshold(W, omega, step=0.01):
    while True:
        Wt = np.where(W >= omega, W, 0.0)
        if is_acyclic(Wt):
            return Wt, omega
        omega = round(omega + step, 10)


def fit_notears_mlp(X, cfg: NotearsConfig | None = None, seed: int = 0, names=(), callback=None) -> WeightedDigraph:
    """Augmented-Lagrangian fit; returns the thresholded acyclic digraph.

    ``callback(stage, info)`` is invoked after every inner solve with the
    current ``alpha``, ``rho``, ``h`` and the optimizer's objective trace.
    """
    cfg = cfg or NotearsConfig()
    X = np.asarray(X, dtype=float)
    n_samples, n_vars = X.shape
    if n_samples <= n_vars:
        raise ValidationError("need more samples than variables")
    rng = np.random.default_rng(seed)
    bank = RegressorBank.init(n_vars, cfg.hidden, rng, cfg.activation, cfg.init_scale)
    prob = _Problem(bank, X, cfg.lambda1, cfg.lambda2)
    x = prob.pack(bank)

    alpha, rho, h = 0.0, 1.0, np.inf
    for outer in range(cfg.max_outer_iter):
        while True:
            trace = []
            res = sopt.minimize(
                prob.objective,
                x,
                args=(alpha, rho),
                jac=True,
                method="L-BFGS-B",
                bounds=prob.bounds,
                options={"maxiter": cfg.max_inner_iter},
                callback=lambda xk: trace.append(prob.objective(xk, alpha, rho)[0]),
            )
            x_new = res.x
            h_new = acyclicity(aggregate_adjacency(prob.unpack(x_new)))
            if callback is not None:
                callback("inner", {"alpha": alpha, "rho": rho, "h": h_new, "trace": trace})
            x = x_new
            if h_new > cfg.progress * h and rho < cfg.rho_max:
                rho *= cfg.rho_growth
            else:
                break
        h = h_new
        alpha += rho * h
        log.debug("outer %d: h=%.3e rho=%.1e alpha=%.3e", outer, h, rho, alpha)
        if h <= cfg.h_tol or rho >= cfg.rho_max:
            break
    if h > cfg.h_tol:
        raise ConvergenceError(f"acyclicity stalled at h={h:.3e} (rho={rho:.1e})", best=h)

    raw = aggregate_adjacency(prob.unpack(x))
    W, omega = _threshold(raw, cfg.omega)
    names = tuple(names) if names else tuple(f"X{i}" for i in range(n_vars))
    return WeightedDigraph(W, names, omega, raw, h)
