"""Ground-truth SEM benchmarks and structure-recovery metrics."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .errors import BalanceError, ShapeError, ValidationError
from .mlp import sigmoid

NOISES = ("uniform", "laplace", "gaussian")
MECHANISM_ACTIVATIONS = {
    "sigmoid": sigmoid,
    "tanh": np.tanh,
    "gauss": lambda z: np.exp(-z * z),
    "sin": np.sin,
}


class IdentifiabilityWarning(UserWarning):
    """Gaussian noise makes a linear SEM unidentifiable from observational data."""


@dataclass
class SemSpec:
    dag: np.ndarray
    kind: str = "linear"
    weights: np.ndarray | None = None
    mechanisms: list = field(default_factory=list)
    noise: str = "uniform"
    noise_scale: float = 1.0
    outcome_parents: list = field(default_factory=list)
    outcome_weights: list = field(default_factory=list)
    outcome_bias: float = 0.0
    names: list = field(default_factory=list)
    activation: str = "tanh"

    def __post_init__(self):
        self.dag = np.asarray(self.dag, dtype=np.int64)
        n = self.dag.shape[0]
        if not is_dag(self.dag):
            raise ValidationError("SemSpec graph is not acyclic")
        if self.kind not in ("linear", "nonlinear"):
            raise ValidationError(f"unknown SEM kind {self.kind!r}")
        if self.noise not in NOISES:
            raise ValidationError(f"unknown noise law {self.noise!r}")
        if self.kind == "linear":
            self.weights = np.asarray(self.weights, dtype=float)
            nz = np.abs(self.weights[self.dag != 0])
            if nz.size and (nz.min() < 0.5 or nz.max() > 2.0):
                raise ValidationError("linear edge weights must have magnitude in [0.5, 2]")
        if any(p < 0 or p >= n for p in self.outcome_parents):
            raise ValidationError("outcome parents must index existing nodes")
        if not self.names:
            self.names = [f"X{i + 1}" for i in range(n)]

    @property
    def n_nodes(self) -> int:
        return self.dag.shape[0]

    def to_json(self) -> dict:
        return {
            "dag": self.dag.tolist(),
            "kind": self.kind,
            "weights": None if self.weights is None else np.asarray(self.weights).tolist(),
            "mechanisms": [
                None if m is None else {"W1": m[0].tolist(), "W2": m[1].tolist()} for m in self.mechanisms
            ],
            "noise": self.noise,
            "noise_scale": self.noise_scale,
            "outcome_parents": [int(p) for p in self.outcome_parents],
            "outcome_weights": [float(w) for w in self.outcome_weights],
            "outcome_bias": float(self.outcome_bias),
            "names": list(self.names),
            "activation": self.activation,
        }

    @classmethod
    def from_json(cls, d: dict) -> "SemSpec":
        mechanisms = [None if m is None else (np.asarray(m["W1"]), np.asarray(m["W2"])) for m in d.get("mechanisms", [])]
        return cls(
            dag=np.asarray(d["dag"]),
            kind=d["kind"],
            weights=None if d.get("weights") is None else np.asarray(d["weights"]),
            mechanisms=mechanisms,
            noise=d["noise"],
            noise_scale=d["noise_scale"],
            outcome_parents=list(d.get("outcome_parents", [])),
            outcome_weights=list(d.get("outcome_weights", [])),
            outcome_bias=d.get("outcome_bias", 0.0),
            names=list(d.get("names", [])),
            activation=d.get("activation", "tanh"),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "SemSpec":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def topological_order(adj) -> list | None:
    """Kahn ordering of the support of ``adj``; None when a cycle exists."""
    support = np.asarray(adj) != 0
    n = support.shape[0]
    indeg = support.sum(axis=0)
    ready = sorted(np.flatnonzero(indeg == 0).tolist())
    order = []
    while ready:
        k = ready.pop(0)
        order.append(k)
        for j in np.flatnonzero(support[k]):
            indeg[j] -= 1
            if indeg[j] == 0:
                ready.append(int(j))
        ready.sort()
    return order if len(order) == n else None


def is_dag(adj) -> bool:
    return topological_order(adj) is not None


def random_dag(n: int, edge_prob: float, seed) -> np.ndarray:
    """Each forward edge of a random permutation included with ``edge_prob``."""
    if n < 2:
        raise ValidationError("need at least 2 nodes")
    if not 0.0 <= edge_prob <= 1.0:
        raise ValidationError("edge_prob must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    upper = np.triu(rng.random((n, n)) < edge_prob, k=1).astype(np.int64)
    dag = np.zeros((n, n), dtype=np.int64)
    dag[np.ix_(perm, perm)] = upper
    return dag


def make_linear_sem(dag, seed, weight_range=(0.5, 2.0), noise="uniform", noise_scale=1.0) -> SemSpec:
    rng = np.random.default_rng(seed)
    dag = np.asarray(dag, dtype=np.int64)
    mags = rng.uniform(*weight_range, size=dag.shape)
    signs = rng.choice([-1.0, 1.0], size=dag.shape)
    return SemSpec(dag, "linear", weights=dag * mags * signs, noise=noise, noise_scale=noise_scale)


def make_nonlinear_sem(dag, seed, hidden=10, noise="uniform", noise_scale=1.0, activation="tanh") -> SemSpec:
    """Per-node mechanism ``act(parents @ W1) @ W2`` with standard-normal weights."""
    rng = np.random.default_rng(seed)
    dag = np.asarray(dag, dtype=np.int64)
    mechanisms = []
    for j in range(dag.shape[0]):
        n_pa = int(dag[:, j].sum())
        if n_pa == 0:
            mechanisms.append(None)
        else:
            mechanisms.append((rng.standard_normal((n_pa, hidden)), rng.standard_normal(hidden)))
    return SemSpec(
        dag, "nonlinear", mechanisms=mechanisms, noise=noise, noise_scale=noise_scale, activation=activation
    )


def sample_noise(kind, scale, size, rng) -> np.ndarray:
    """Zero-mean noise with standard deviation ``scale``."""
    if kind == "uniform":
        half = np.sqrt(3.0) * scale
        return rng.uniform(-half, half, size=size)
    if kind == "laplace":
        return rng.laplace(0.0, scale / np.sqrt(2.0), size=size)
    if kind == "gaussian":
        return rng.normal(0.0, scale, size=size)
    raise ValidationError(f"unknown noise law {kind!r}")


def sample_linear_sem(spec: SemSpec, B: int, seed) -> np.ndarray:
    if spec.kind != "linear":
        raise ValidationError("sample_linear_sem needs a linear SemSpec")
    if spec.noise == "gaussian":
        warnings.warn("gaussian noise: linear SEM is not identifiable", IdentifiabilityWarning, stacklevel=2)
    rng = np.random.default_rng(seed)
    n = spec.n_nodes
    E = sample_noise(spec.noise, spec.noise_scale, (B, n), rng)
    X = np.zeros((B, n))
    for j in topological_order(spec.dag):
        X[:, j] = X @ spec.weights[:, j] + E[:, j]
    return X


def sample_nonlinear_sem(spec: SemSpec, B: int, seed) -> np.ndarray:
    if spec.kind != "nonlinear":
        raise ValidationError("sample_nonlinear_sem needs a nonlinear SemSpec")
    rng = np.random.default_rng(seed)
    n = spec.n_nodes
    E = sample_noise(spec.noise, spec.noise_scale, (B, n), rng)
    X = np.zeros((B, n))
    for j in topological_order(spec.dag):
        parents = np.flatnonzero(spec.dag[:, j])
        X[:, j] = E[:, j]
        if parents.size:
            W1, W2 = spec.mechanisms[j]
            X[:, j] += MECHANISM_ACTIVATIONS[spec.activation](X[:, parents] @ W1) @ W2
    return X


def sample_sem(spec: SemSpec, B: int, seed) -> np.ndarray:
    if spec.kind == "linear":
        return sample_linear_sem(spec, B, seed)
    return sample_nonlinear_sem(spec, B, seed)


def balance_bias(X, parents, weights) -> float:
    """Intercept making the expected positive rate exactly one half."""
    X = np.asarray(X, dtype=float)
    s = X[:, list(parents)] @ np.asarray(weights, dtype=float) if len(parents) else np.zeros(X.shape[0])
    if not np.any(s):
        return 0.0

    def gap(b):
        return float(np.mean(sigmoid(s + b))) - 0.5

    lo, hi = -50.0 - np.abs(s).max(), 50.0 + np.abs(s).max()
    if gap(lo) > 0 or gap(hi) < 0:
        raise BalanceError("cannot center the outcome rate")
    return float(brentq(gap, lo, hi, xtol=1e-12))


def attach_binary_outcome(X, parents, weights, seed, rate_range=(0.35, 0.65)) -> np.ndarray:
    """``y ~ Bernoulli(sigmoid(X[:, parents] @ weights + b))`` with a balancing ``b``."""
    if len(parents) != len(weights):
        raise ShapeError("parents and weights differ in length")
    X = np.asarray(X, dtype=float)
    if any(p < 0 or p >= X.shape[1] for p in parents):
        raise ValidationError("outcome parent index out of range")
    b = balance_bias(X, parents, weights)
    s = X[:, list(parents)] @ np.asarray(weights, dtype=float) if len(parents) else np.zeros(X.shape[0])
    rng = np.random.default_rng(seed)
    y = (rng.random(X.shape[0]) < sigmoid(s + b)).astype(np.int64)
    rate = y.mean()
    if not rate_range[0] <= rate <= rate_range[1]:
        raise BalanceError(f"positive rate {rate:.3f} outside {rate_range}")
    return y


@dataclass(frozen=True)
class RecoveryMetrics:
    shd: int
    edge_precision: float
    edge_recall: float
    edge_f1: float


def structural_metrics(est, truth) -> RecoveryMetrics:
    """SHD counts each differing node pair once, so a reversal costs 1."""
    est = np.asarray(est) != 0
    truth = np.asarray(truth) != 0
    if est.shape != truth.shape or est.ndim != 2 or est.shape[0] != est.shape[1]:
        raise ShapeError(f"adjacency shapes differ: {est.shape} vs {truth.shape}")
    n = est.shape[0]
    iu = np.triu_indices(n, k=1)
    diff = (est[iu] != truth[iu]) | (est.T[iu] != truth.T[iu])
    shd = int(diff.sum())
    off = ~np.eye(n, dtype=bool)
    tp = int((est & truth & off).sum())
    n_est = int((est & off).sum())
    n_true = int((truth & off).sum())
    precision = tp / n_est if n_est else float(n_true == 0)
    recall = tp / n_true if n_true else float(n_est == 0)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return RecoveryMetrics(shd, precision, recall, f1)
