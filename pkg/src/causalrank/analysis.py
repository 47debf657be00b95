"""Correlations, cause/effect extraction and rank-order concordance."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import DegenerateError, InsufficientOverlapError, ShapeError, ValidationError

CASES = ("causal", "effect", "gbt_imp", "lr_imp", "f_corr")
DEFAULT_PAIRS = tuple(itertools.product(("causal", "effect"), ("f_corr", "gbt_imp", "lr_imp")))
MIN_OVERLAP = 4


def _pair(x, y, min_len):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ShapeError("need two equal-length vectors")
    if x.size < min_len:
        raise ValidationError(f"need at least {min_len} observations, got {x.size}")
    return x, y


def pearson(x, y) -> float:
    x, y = _pair(x, y, 3)
    dx, dy = x - x.mean(), y - y.mean()
    sx, sy = math.sqrt(dx @ dx), math.sqrt(dy @ dy)
    if sx == 0 or sy == 0:
        raise DegenerateError("pearson correlation of a constant vector")
    return float(np.clip((dx @ dy) / (sx * sy), -1.0, 1.0))


def t_test_p(r: float, n: int) -> float:
    """Two-sided p-value of correlation ``r`` via Student-t with n-2 dof."""
    if abs(r) >= 1.0:
        return 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    return float(2.0 * stats.t.sf(abs(t), n - 2))


def fractional_ranks(x) -> np.ndarray:
    return stats.rankdata(x, method="average")


def spearman(x, y) -> tuple[float, float]:
    """Rank correlation with the t-approximation p-value."""
    x, y = _pair(x, y, 4)
    rho = _rank_correlation(fractional_ranks(x), fractional_ranks(y))
    return rho, t_test_p(rho, x.size)


def _rank_correlation(rx, ry) -> float:
    """Pearson correlation of average ranks in exact integer arithmetic.

    Doubled average ranks are integers, so the only rounding is the final
    division (and a square root when the variance product is not a square).
    """
    a = [int(round(2 * v)) for v in rx]
    b = [int(round(2 * v)) for v in ry]
    n = len(a)
    sa, sb = sum(a), sum(b)
    cov = n * sum(i * j for i, j in zip(a, b)) - sa * sb
    va = n * sum(i * i for i in a) - sa * sa
    vb = n * sum(j * j for j in b) - sb * sb
    if va == 0 or vb == 0:
        raise DegenerateError("spearman correlation of an all-tied vector")
    prod = va * vb
    root = math.isqrt(prod)
    rho = cov / root if root * root == prod else cov / math.sqrt(prod)
    return float(min(1.0, max(-1.0, rho)))


def spearman_permutation_p(x, y, max_n=10) -> float:
    """Exact two-sided p-value by enumerating every permutation of ``y``'s ranks."""
    x, y = _pair(x, y, 4)
    n = x.size
    if n > max_n:
        raise ValidationError(f"exact permutation test limited to n <= {max_n}")
    rx = fractional_ranks(x)
    ry = fractional_ranks(y)
    cx, cy = rx - rx.mean(), ry - ry.mean()
    denom = math.sqrt((cx @ cx) * (cy @ cy))
    if denom == 0:
        raise DegenerateError("spearman correlation of an all-tied vector")
    observed = abs(cx @ cy) / denom
    hits = total = 0
    perms = itertools.permutations(range(n))
    while True:
        chunk = np.array(list(itertools.islice(perms, 200_000)))
        if chunk.size == 0:
            break
        rho = np.abs(cy[chunk] @ cx) / denom
        hits += int(np.count_nonzero(rho >= observed - 1e-12))
        total += chunk.shape[0]
    return hits / total


def _graph_parts(g):
    if hasattr(g, "W"):
        return np.asarray(g.W), list(g.names)
    if hasattr(g, "adjacency"):
        return np.asarray(g.adjacency), list(g.names)
    raise TypeError(f"unsupported graph type {type(g).__name__}")


def signed_edges(g, target: str) -> tuple[dict, dict]:
    """Raw (signed) weights of edges into and out of ``target``."""
    A, names = _graph_parts(g)
    if target not in names:
        raise KeyError(f"target {target!r} is not a node of the graph")
    t = names.index(target)
    causal = {names[k]: float(A[k, t]) for k in range(len(names)) if k != t and A[k, t] != 0}
    effect = {names[k]: float(A[t, k]) for k in range(len(names)) if k != t and A[t, k] != 0}
    return causal, effect


def extract_cause_effect(g, target: str) -> tuple[dict, dict]:
    """Causal strengths ``|v -> target|`` and effect strengths ``|target -> v|``.

    Variables with no edge in a direction are left out of that mapping.
    """
    causal, effect = signed_edges(g, target)
    return {k: abs(v) for k, v in causal.items()}, {k: abs(v) for k, v in effect.items()}


@dataclass(frozen=True)
class RankTable:
    case: str
    entries: tuple  # (variable, score, rank), best first

    @property
    def scores(self) -> dict:
        return {v: s for v, s, _ in self.entries}

    @property
    def ranks(self) -> dict:
        return {v: r for v, _, r in self.entries}

    @property
    def variables(self) -> list:
        return [v for v, _, _ in self.entries]


def competition_ranks(values) -> np.ndarray:
    """1-based ranks, descending; ties share the smallest rank (1, 2, 2, 4)."""
    values = np.asarray(values, dtype=float)
    return np.array([1 + int(np.count_nonzero(values > v)) for v in values], dtype=np.int64)


def rank_by_score(scores: dict, case: str = "") -> RankTable:
    """Rank by descending ``|score|``; raw signed scores are kept."""
    if not scores:
        raise ValidationError("cannot rank an empty score map")
    items = sorted(scores.items(), key=lambda kv: (-abs(kv[1]), kv[0]))
    ranks = competition_ranks([abs(s) for _, s in items])
    return RankTable(case, tuple((v, float(s), int(r)) for (v, s), r in zip(items, ranks)))


@dataclass(frozen=True)
class ConcordanceRow:
    x: str
    y: str
    method: str
    rho: float
    p_value: float
    significant: bool
    n: int
    note: str = ""


@dataclass(frozen=True)
class ConcordanceReport:
    pairs: list = field(default_factory=list)
    alpha: float = 0.05


def compare_tables(tx: RankTable, ty: RankTable, alpha=0.05, method="") -> ConcordanceRow:
    """Spearman correlation of |score| over the variables both tables share."""
    shared = sorted(set(tx.variables) & set(ty.variables))
    if len(shared) < MIN_OVERLAP:
        raise InsufficientOverlapError(
            f"{tx.case} vs {ty.case}: {len(shared)} shared variables, need {MIN_OVERLAP}"
        )
    sx, sy = tx.scores, ty.scores
    rho, p = spearman([abs(sx[v]) for v in shared], [abs(sy[v]) for v in shared])
    return ConcordanceRow(tx.case, ty.case, method, rho, p, bool(p < alpha), len(shared))


def concordance(tables, alpha=0.05, pairs=None, method="", strict=True) -> ConcordanceReport:
    """Compare the requested ``(x_case, y_case)`` pairs (causal and effect against each comparison case by default).

    With ``strict=False`` a pair lacking overlap becomes a NaN row with a
    note instead of raising.
    """
    if not 0 < alpha < 1:
        raise ValidationError("alpha must lie in (0, 1)")
    by_case = {t.case: t for t in tables}
    pairs = DEFAULT_PAIRS if pairs is None else pairs
    rows = []
    for x, y in pairs:
        if x not in by_case or y not in by_case:
            continue
        try:
            rows.append(compare_tables(by_case[x], by_case[y], alpha, method))
        except (InsufficientOverlapError, DegenerateError) as exc:
            if strict:
                raise
            rows.append(ConcordanceRow(x, y, method, math.nan, math.nan, False, 0, str(exc)))
    return ConcordanceReport(rows, alpha)


def pearson_table(values, names, score) -> list:
    """``(variable, r, p)`` for every column correlated with ``score``."""
    values = np.asarray(values, dtype=float)
    rows = []
    for j, name in enumerate(names):
        try:
            r = pearson(values[:, j], score)
        except DegenerateError:
            rows.append((name, math.nan, math.nan))
            continue
        rows.append((name, r, t_test_p(r, values.shape[0])))
    return rows
