"""Flat ``key = value`` configuration with dotted section prefixes.

Every key can be overridden on the command line as ``--key value`` or
``--key=value`` (e.g. ``--notears.omega 0.4``).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ConfigError

DEFAULTS = {
    "input": "",
    "schema": "",
    "out": "out",
    "seed": 0,
    "method": "both",
    "importance": "both",
    "alpha": 0.05,
    "likelihood.learning_rate": 1e-3,
    "likelihood.batch_size": 32,
    "likelihood.max_epochs": 500,
    "likelihood.accuracy_target": 0.90,
    "likelihood.hidden": "64,32,16,8",
    "likelihood.standardize_score": False,
    "lingam.prune_threshold": 0.05,
    "notears.hidden": "10",
    "notears.lambda1": 0.01,
    "notears.lambda2": 0.01,
    "notears.max_inner_iter": 100,
    "notears.h_tol": 1e-8,
    "notears.rho_max": 1e16,
    "notears.omega": 0.3,
    "gbt.n_trees": 100,
    "gbt.max_depth": 3,
    "gbt.learning_rate": 0.1,
    "gbt.min_samples_leaf": 5,
    "logreg.penalty": 1.0,
    "cv.repeats": 10,
    "report.figures": True,
    "synth.nodes": 8,
    "synth.samples": 1000,
    "synth.edge_prob": 0.3,
    "synth.kind": "nonlinear",
    "synth.noise": "uniform",
    "synth.activation": "tanh",
    "synth.outcome_parents": "",
    "synth.n_outcome_parents": 3,
    "synth.outcome_weight": 2.0,
    "synth.outcome_weights": "",
    "eval.truth": "",
    "eval.graphs": "",
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _coerce(key, raw):
    default = DEFAULTS[key]
    text = str(raw).strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot interpret {text!r} as {type(default).__name__}") from None
    return text


def parse_config_text(text: str, source="<config>") -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        values[key] = _coerce(key, value)
    return values


def load_config(path=None, overrides=None) -> dict:
    cfg = dict(DEFAULTS)
    if path:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        cfg.update(parse_config_text(p.read_text(encoding="utf-8"), str(p)))
    for key, value in (overrides or {}).items():
        if key not in DEFAULTS:
            raise ConfigError(f"unknown key {key!r}")
        cfg[key] = _coerce(key, value)
    validate(cfg)
    return cfg


def validate(cfg: dict) -> None:
    if cfg["method"] not in ("lingam", "notears", "both"):
        raise ConfigError("method must be lingam, notears or both")
    if cfg["importance"] not in ("gbt", "logreg", "both"):
        raise ConfigError("importance must be gbt, logreg or both")
    if not 0 < cfg["alpha"] < 1:
        raise ConfigError("alpha must lie in (0, 1)")


def int_list(text) -> tuple:
    text = str(text).strip()
    return tuple(int(t) for t in text.split(",") if t.strip()) if text else ()


def float_list(text) -> tuple:
    text = str(text).strip()
    return tuple(float(t) for t in text.split(",") if t.strip()) if text else ()


def methods(cfg) -> list:
    return ["lingam", "notears"] if cfg["method"] == "both" else [cfg["method"]]


def importances(cfg) -> list:
    return ["gbt", "logreg"] if cfg["importance"] == "both" else [cfg["importance"]]


def module_seed(root: int, name: str) -> int:
    """Deterministic per-module seed derived from the root seed."""
    key = [ord(c) for c in name]
    return int(np.random.SeedSequence([int(root), *key]).generate_state(1)[0])


def dump(cfg: dict) -> str:
    return "".join(f"{k} = {cfg[k]}\n" for k in DEFAULTS)
