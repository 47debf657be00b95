"""Dense feed-forward networks with hand-written backpropagation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError


def sigmoid(z):
    # split by sign so exp never overflows
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


_ACT = {
    "relu": (lambda z: np.maximum(z, 0.0), lambda z, a: (z > 0).astype(float)),
    "sigmoid": (sigmoid, lambda z, a: a * (1.0 - a)),
    "tanh": (np.tanh, lambda z, a: 1.0 - a * a),
    "identity": (lambda z: z, lambda z, a: np.ones_like(z)),
}


@dataclass
class MlpParams:
    """Layer list of ``(weight d_in x d_out, bias d_out)`` plus one activation per layer."""

    layers: list
    activations: list

    def __post_init__(self):
        if len(self.layers) != len(self.activations):
            raise ShapeError("one activation per layer required")
        for a in self.activations:
            if a not in _ACT:
                raise ValueError(f"unknown activation {a!r}")
        for (w0, _), (w1, _) in zip(self.layers, self.layers[1:]):
            if w0.shape[1] != w1.shape[0]:
                raise ShapeError(f"layer dims do not chain: {w0.shape} -> {w1.shape}")
        for w, b in self.layers:
            if b.shape != (w.shape[1],):
                raise ShapeError(f"bias shape {b.shape} does not match weight {w.shape}")

    @property
    def sizes(self) -> list[int]:
        return [self.layers[0][0].shape[0]] + [w.shape[1] for w, _ in self.layers]

    def copy(self) -> "MlpParams":
        return MlpParams([(w.copy(), b.copy()) for w, b in self.layers], list(self.activations))

    def flat(self) -> np.ndarray:
        return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in self.layers])

    def with_flat(self, theta) -> "MlpParams":
        layers, k = [], 0
        for w, b in self.layers:
            nw, nb = w.size, b.size
            layers.append((theta[k:k + nw].reshape(w.shape).copy(), theta[k + nw:k + nw + nb].copy()))
            k += nw + nb
        return MlpParams(layers, list(self.activations))


def init_mlp(sizes, activations, rng) -> MlpParams:
    """He-uniform for rectifier layers, Glorot-uniform otherwise; zero biases."""
    layers = []
    for d_in, d_out, act in zip(sizes[:-1], sizes[1:], activations):
        if act == "relu":
            bound = np.sqrt(6.0 / d_in)
        else:
            bound = np.sqrt(6.0 / (d_in + d_out))
        layers.append((rng.uniform(-bound, bound, size=(d_in, d_out)), np.zeros(d_out)))
    return MlpParams(layers, list(activations))


def forward(params: MlpParams, X):
    """Return the output matrix and the per-layer cache needed by :func:`backward`."""
    a = np.asarray(X, dtype=float)
    if a.ndim != 2 or a.shape[1] != params.sizes[0]:
        raise ShapeError(f"input shape {a.shape} does not match first layer width {params.sizes[0]}")
    cache = [(None, a)]
    for (w, b), act in zip(params.layers, params.activations):
        z = a @ w + b
        a = _ACT[act][0](z)
        cache.append((z, a))
    return a, cache


def backward(params: MlpParams, cache, grad_out):
    """Gradients ``[(dW, db), ...]`` given dLoss/dOutput."""
    grads = [None] * len(params.layers)
    delta = np.asarray(grad_out, dtype=float)
    for l in range(len(params.layers) - 1, -1, -1):
        z, a = cache[l + 1]
        delta = delta * _ACT[params.activations[l]][1](z, a)
        a_prev = cache[l][1]
        grads[l] = (a_prev.T @ delta, delta.sum(axis=0))
        if l:
            delta = delta @ params.layers[l][0].T
    return grads


def mlp_forward(model: MlpParams, X) -> np.ndarray:
    """Predictions for every row of ``X`` from a single-output network."""
    out, _ = forward(model, X)
    return out[:, 0]


class Adam:
    """Adaptive-moment optimizer over a list of arrays, updated in place."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
