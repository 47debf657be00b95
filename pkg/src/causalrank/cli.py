"""Command-line entry point: ``discover``, ``synth`` and ``eval``.

Exit codes: 0 success, 1 internal error, 2 config/input error,
3 data-degeneracy error, 4 evaluation mismatch.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import config as config_mod
from .analysis import DEFAULT_PAIRS, concordance, pearson_table, rank_by_score, signed_edges
from .data import (
    LIKELIHOOD_COLUMN,
    Dataset,
    ColumnSchema,
    impute_median,
    load_csv,
    load_schema,
    standardize,
    write_csv,
    write_schema,
)
from .errors import CausalRankError, ConfigError, EvaluationMismatchError, ParseError
from .likelihood import LikelihoodConfig, augment_with_likelihood, train_likelihood_mlp
from .lingam import LingamConfig, fit_lingam
from .mlmodels import GbtConfig, LogregConfig, cross_validated_importance
from .notears import NotearsConfig, fit_notears_mlp
from .synth import (
    SemSpec,
    attach_binary_outcome,
    balance_bias,
    make_linear_sem,
    make_nonlinear_sem,
    random_dag,
    sample_sem,
    structural_metrics,
)

log = logging.getLogger(__name__)

IMPORTANCE_CASE = {"gbt": "gbt_imp", "logreg": "lr_imp"}
CASE_TITLES = {
    "causal": "Causal variables (X -> outcome)",
    "effect": "Effect variables (outcome -> X)",
    "gbt_imp": "Gradient-boosted tree importance",
    "lr_imp": "Logistic regression importance",
    "f_corr": "Feature correlation with the likelihood score",
}
CASE_ORDER = ("causal", "effect", "gbt_imp", "lr_imp", "f_corr")


# ---------------------------------------------------------------- writers


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "NaN" if math.isnan(v) else repr(float(v))
    return str(v)


def write_rows(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")
    return path


def _dot_id(name) -> str:
    return '"' + str(name).replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(A, names, graph_name="G") -> str:
    """DOT digraph with one edge per nonzero ``A[k, j]`` (k -> j)."""
    A = np.asarray(A, dtype=float)
    lines = [f"digraph {_dot_id(graph_name)} {{", "  node [shape=box];"]
    lines += [f"  {_dot_id(n)};" for n in names]
    for k, j in zip(*np.nonzero(A)):
        lines.append(f'  {_dot_id(names[k])} -> {_dot_id(names[j])} [label="{A[k, j]:.2f}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


class Manifest:
    """Completion record rewritten after every stage so partial runs are legible."""

    def __init__(self, out: Path):
        self.path = out / "MANIFEST"
        self.stages = []
        self.files = []
        self.status = "running"
        self.flush()

    def add(self, path) -> Path:
        self.files.append(Path(path).name)
        return path

    def stage(self, name):
        self.stages.append(name)
        self.flush()

    def finish(self, status):
        self.status = status
        self.flush()

    def flush(self):
        lines = [f"status: {self.status}", "stages: " + " ".join(self.stages), "files:"]
        lines += [f"  {f}" for f in self.files]
        self.path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------- discover


def _module_configs(cfg):
    lk = LikelihoodConfig(
        learning_rate=cfg["likelihood.learning_rate"],
        batch_size=cfg["likelihood.batch_size"],
        max_epochs=cfg["likelihood.max_epochs"],
        accuracy_target=cfg["likelihood.accuracy_target"],
        hidden=config_mod.int_list(cfg["likelihood.hidden"]),
    )
    nt = NotearsConfig(
        hidden=config_mod.int_list(cfg["notears.hidden"]),
        lambda1=cfg["notears.lambda1"],
        lambda2=cfg["notears.lambda2"],
        max_inner_iter=cfg["notears.max_inner_iter"],
        h_tol=cfg["notears.h_tol"],
        rho_max=cfg["notears.rho_max"],
        omega=cfg["notears.omega"],
    )
    gbt = GbtConfig(
        n_trees=cfg["gbt.n_trees"],
        max_depth=cfg["gbt.max_depth"],
        learning_rate=cfg["gbt.learning_rate"],
        min_samples_leaf=cfg["gbt.min_samples_leaf"],
    )
    lr = LogregConfig(penalty=cfg["logreg.penalty"])
    return lk, LingamConfig(cfg["lingam.prune_threshold"]), nt, gbt, lr


def csd_view(ds: Dataset) -> tuple[np.ndarray, tuple]:
    """Columns fed to structure discovery: the first level of each categorical
    group is dropped so indicators are not exactly collinear."""
    drop = {idx[0] for idx in ds.groups.values() if len(idx) > 1}
    keep = [i for i in range(ds.var_count) if i not in drop]
    return np.asarray(ds.values)[:, keep], tuple(ds.columns[i] for i in keep)


def _rank_rows(table):
    return [] if table is None else list(table.entries)


def _safe_rank(scores, case):
    return rank_by_score(scores, case) if scores else None


def run_discover(cfg: dict) -> dict:
    """Run the full pipeline; returns in-memory results and writes artifacts."""
    if not cfg["schema"]:
        raise ConfigError("no schema file given (schema = PATH)")
    if not cfg["input"]:
        raise ConfigError("no input file given (input = PATH)")
    schema = load_schema(cfg["schema"])
    raw = load_csv(cfg["input"], schema)
    lk_cfg, lg_cfg, nt_cfg, gbt_cfg, lr_cfg = _module_configs(cfg)
    seed = cfg["seed"]

    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    manifest = Manifest(out)
    figures = cfg["report.figures"]
    try:
        results = _discover_stages(cfg, raw, out, manifest, seed, lk_cfg, lg_cfg, nt_cfg, gbt_cfg, lr_cfg, figures)
    except BaseException as exc:
        manifest.finish(f"failed after stage '{manifest.stages[-1] if manifest.stages else 'start'}': {exc}")
        raise
    manifest.finish("complete")
    return results


def _discover_stages(cfg, raw, out, manifest, seed, lk_cfg, lg_cfg, nt_cfg, gbt_cfg, lr_cfg, figures):
    from . import plotting

    ds, _ = standardize(impute_median(raw))
    manifest.stage("prepare")

    _, lres = train_likelihood_mlp(ds, lk_cfg, seed=config_mod.module_seed(seed, "likelihood"))
    aug = augment_with_likelihood(ds, lres, cfg["likelihood.standardize_score"])
    fig_files = {}
    if figures:
        fig_files["likelihood"] = manifest.add(
            plotting.likelihood_histogram(lres.scores, ds.target, out / "likelihood.png")
        ).name
    manifest.stage("likelihood")

    X, names = csd_view(aug)
    graphs = {}
    for method in config_mod.methods(cfg):
        if method == "lingam":
            g = fit_lingam(X, lg_cfg, names)
            A = g.adjacency
        else:
            g = fit_notears_mlp(X, nt_cfg, seed=config_mod.module_seed(seed, "notears"), names=names)
            A = g.W
        graphs[method] = g
        manifest.add(write_json(out / f"adjacency.{method}.json", g.to_json()))
        dot = out / f"graph.{method}.dot"
        dot.write_text(to_dot(A, names, method), encoding="utf-8")
        manifest.add(dot)
        if figures:
            fig_files[f"adjacency.{method}"] = manifest.add(
                plotting.adjacency_heatmap(A, names, out / f"adjacency.{method}.png", method)
            ).name
        manifest.stage(method)

    predictors = [i for i, c in enumerate(aug.columns) if c != LIKELIHOOD_COLUMN]
    pred_names = [aug.columns[i] for i in predictors]
    score = aug.column(LIKELIHOOD_COLUMN)
    ptab = pearson_table(aug.values[:, predictors], pred_names, score)
    manifest.add(write_rows(out / "pearson.csv", ["variable", "r", "p_value"], ptab))

    tables = {}
    for kind in config_mod.importances(cfg):
        imp = cross_validated_importance(
            aug,
            kind,
            seed=config_mod.module_seed(seed, kind),
            repeats=cfg["cv.repeats"],
            gbt_cfg=gbt_cfg,
            lr_cfg=lr_cfg,
        )
        case = IMPORTANCE_CASE[kind]
        tables[case] = rank_by_score(dict(zip(imp.names, imp.scores.tolist())), case)
        manifest.stage(case)
    tables["f_corr"] = _safe_rank({v: r for v, r, _ in ptab if not math.isnan(r)}, "f_corr")

    per_method = {}
    for method, g in graphs.items():
        causal, effect = signed_edges(g, LIKELIHOOD_COLUMN)
        per_method[method] = {"causal": _safe_rank(causal, "causal"), "effect": _safe_rank(effect, "effect")}

    for case in ("gbt_imp", "lr_imp", "f_corr"):
        if case in tables:
            manifest.add(write_rows(out / f"ranks.{case}.csv", ["variable", "score", "rank"], _rank_rows(tables[case])))
    for method, cases in per_method.items():
        for case, table in cases.items():
            manifest.add(
                write_rows(out / f"ranks.{case}.{method}.csv", ["variable", "score", "rank"], _rank_rows(table))
            )

    rows = []
    for method, cases in per_method.items():
        available = [t for t in list(cases.values()) + list(tables.values()) if t is not None]
        rep = concordance(available, cfg["alpha"], DEFAULT_PAIRS, method=method, strict=False)
        have = {(r.x, r.y) for r in rep.pairs}
        rows.extend(rep.pairs)
        for x, y in DEFAULT_PAIRS:
            if (x, y) not in have and (y in tables or y in cases):
                rows.append(_missing_row(x, y, method, cases))
    manifest.add(
        write_rows(
            out / "concordance.csv",
            ["X", "Y", "method", "rho", "p_value", "significant", "n", "note"],
            [(r.x, r.y, r.method, r.rho, r.p_value, r.significant, r.n, r.note) for r in rows],
        )
    )
    if figures and rows:
        fig_files["concordance"] = manifest.add(
            plotting.concordance_bars(rows, cfg["alpha"], out / "concordance.png")
        ).name
    manifest.stage("analysis")

    report = render_report(cfg, raw, aug, lres, graphs, per_method, tables, ptab, rows, fig_files)
    manifest.add(_write_text(out / "report.md", report))
    manifest.stage("report")
    return {
        "likelihood": lres,
        "augmented": aug,
        "graphs": graphs,
        "per_method": per_method,
        "tables": tables,
        "pearson": ptab,
        "concordance": rows,
    }


def _missing_row(x, y, method, cases):
    from .analysis import ConcordanceRow

    reason = f"no {x} variables" if cases.get(x) is None else f"no {y} variables"
    return ConcordanceRow(x, y, method, math.nan, math.nan, False, 0, reason)


def _write_text(path, text) -> Path:
    path = Path(path)
    path.write_text(text, encoding="utf-8")
    return path


def _md_table(header, rows) -> list:
    out = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    out += ["| " + " | ".join(rows_i) + " |" for rows_i in rows]
    return out


def _num(v, digits=3) -> str:
    return "n/a" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.{digits}f}"


def render_report(cfg, raw, aug, lres, graphs, per_method, tables, ptab, rows, fig_files) -> str:
    lines = ["# Causal structure discovery report", ""]
    lines += [
        "## Cohort",
        "",
        f"- input rows: {raw.row_count}, predictors: {raw.var_count} (encoded)",
        f"- likelihood classifier: training accuracy {lres.train_accuracy:.3f} after {lres.epochs} epochs",
        f"- class weights: w0 = {lres.w0:.3f}, w1 = {lres.w1:.3f}",
        f"- correctly classified rows kept: {aug.row_count}",
        f"- seed: {cfg['seed']}, alpha: {cfg['alpha']}",
        "",
        "Accuracy is measured on the training data; the classifier is a label-to-score",
        "transform, not a predictive model.",
        "",
    ]
    if "likelihood" in fig_files:
        lines += [f"![likelihood scores]({fig_files['likelihood']})", ""]

    lines += ["## Structure discovery", ""]
    for method, g in graphs.items():
        A = g.adjacency if method == "lingam" else g.W
        n_edges = int(np.count_nonzero(A))
        extra = f", threshold {g.omega:.2f}" if method == "notears" else ""
        lines.append(f"- {method}: {n_edges} edges{extra} (graph.{method}.dot, adjacency.{method}.json)")
        key = f"adjacency.{method}"
        if key in fig_files:
            lines += ["", f"![{method} adjacency]({fig_files[key]})", ""]
    if lines[-1]:
        lines.append("")

    for case in CASE_ORDER:
        if case in ("causal", "effect"):
            present = [(m, c[case]) for m, c in per_method.items()]
            if not present:
                continue
            lines += [f"## {case}", "", CASE_TITLES[case], ""]
            for method, table in present:
                lines.append(f"### {method}")
                lines.append("")
                if table is None:
                    lines += ["No edges in this direction.", ""]
                    continue
                lines += _md_table(
                    ["rank", "variable", "strength"],
                    [(str(r), v, f"{s:+.3f}") for v, s, r in table.entries],
                )
                lines.append("")
        elif case in tables:
            table = tables[case]
            lines += [f"## {case}", "", CASE_TITLES[case], ""]
            if table is None:
                lines += ["No scores available.", ""]
                continue
            if case == "f_corr":
                pvals = {v: p for v, _, p in ptab}
                body = [(str(r), v, f"{s:+.3f}", _num(pvals[v], 4)) for v, s, r in table.entries]
                lines += _md_table(["rank", "variable", "r", "p"], body)
            else:
                lines += _md_table(["rank", "variable", "importance"], [(str(r), v, f"{s:.4f}") for v, s, r in table.entries])
            lines.append("")

    lines += ["## Concordance", "", f"Spearman correlation between rank orders (significant: p < {cfg['alpha']}).", ""]
    body = [
        (r.method, r.x, r.y, _num(r.rho), _num(r.p_value, 4), "yes" if r.significant else "no", str(r.n), r.note)
        for r in rows
    ]
    lines += _md_table(["method", "X", "Y", "rho", "p", "significant", "n", "note"], body)
    lines.append("")
    if "concordance" in fig_files:
        lines += [f"![concordance]({fig_files['concordance']})", ""]
    return "\n".join(lines)


# ---------------------------------------------------------------- synth


def run_synth(cfg: dict) -> dict:
    seed = cfg["seed"]
    n = cfg["synth.nodes"]
    B = cfg["synth.samples"]
    if n < 2 or B < 2:
        raise ConfigError("synth.nodes and synth.samples must be at least 2")
    dag = random_dag(n, cfg["synth.edge_prob"], config_mod.module_seed(seed, "dag"))
    sem_seed = config_mod.module_seed(seed, "sem")
    if cfg["synth.kind"] == "linear":
        spec = make_linear_sem(dag, sem_seed, noise=cfg["synth.noise"])
    elif cfg["synth.kind"] == "nonlinear":
        spec = make_nonlinear_sem(dag, sem_seed, noise=cfg["synth.noise"], activation=cfg["synth.activation"])
    else:
        raise ConfigError("synth.kind must be linear or nonlinear")
    X = sample_sem(spec, B, config_mod.module_seed(seed, "sample"))

    rng = np.random.default_rng(config_mod.module_seed(seed, "outcome"))
    parents = list(config_mod.int_list(cfg["synth.outcome_parents"]))
    if not parents:
        k = cfg["synth.n_outcome_parents"]
        if not 0 <= k <= n:
            raise ConfigError("synth.n_outcome_parents out of range")
        parents = sorted(rng.choice(n, size=k, replace=False).tolist())
    weights = list(config_mod.float_list(cfg["synth.outcome_weights"]))
    if not weights:
        # distinct magnitudes so the drivers have a well-defined order
        mags = cfg["synth.outcome_weight"] * np.linspace(1.0, 0.5, len(parents)) if parents else np.zeros(0)
        weights = (mags * rng.choice([-1.0, 1.0], size=len(parents))).tolist()
    if len(weights) != len(parents):
        raise ConfigError("synth.outcome_weights must match the outcome parents")
    # the outcome acts on standardized parents so weights are scale-free
    Z = (X - X.mean(axis=0)) / X.std(axis=0)
    y = attach_binary_outcome(Z, parents, weights, config_mod.module_seed(seed, "label"))
    spec.outcome_parents = parents
    spec.outcome_weights = weights
    spec.outcome_bias = balance_bias(Z, parents, weights)

    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    schema = [ColumnSchema(name, "continuous") for name in spec.names] + [ColumnSchema("outcome", "target")]
    ds = Dataset(schema, tuple(spec.names), ("continuous",) * n, X, y, "outcome")
    write_csv(ds, out / "data.csv")
    write_schema(schema, out / "schema.csv")
    spec.save(out / "sem.json")
    return {"spec": spec, "X": X, "y": y, "dir": out}


# ---------------------------------------------------------------- eval


def _load_graph(path):
    path = Path(path)
    try:
        d = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"graph file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc.msg}", exc.lineno) from None
    A = d.get("W", d.get("adjacency"))
    if A is None:
        raise ParseError(f"{path}: no 'W' or 'adjacency' entry")
    stem = path.stem
    method = stem.split(".", 1)[1] if stem.startswith("adjacency.") else stem
    return method, np.asarray(A, dtype=float), list(d.get("names", []))


def truth_for(spec: SemSpec, names: list, shape) -> np.ndarray:
    """Ground-truth adjacency aligned with an estimate's node list.

    Estimates from ``discover`` carry an extra likelihood node whose true
    parents are the outcome parents.
    """
    n = spec.n_nodes
    truth_names = list(spec.names)
    if not names:
        if shape != (n, n):
            raise EvaluationMismatchError(f"estimate is {shape}, truth has {n} nodes")
        return spec.dag.copy()
    if len(names) != shape[0] or shape[0] != shape[1]:
        raise EvaluationMismatchError(f"estimate shape {shape} does not match its {len(names)} names")
    if names == truth_names:
        return spec.dag.copy()
    if names == truth_names + [LIKELIHOOD_COLUMN]:
        T = np.zeros((n + 1, n + 1), dtype=np.int64)
        T[:n, :n] = spec.dag
        T[list(spec.outcome_parents), n] = 1
        return T
    raise EvaluationMismatchError(f"estimate nodes {names} do not match truth nodes {truth_names}")


def run_eval(cfg: dict) -> list:
    if not cfg["eval.truth"] or not cfg["eval.graphs"]:
        raise ConfigError("eval needs --truth SEM.json and --graphs FILE [FILE ...]")
    try:
        spec = SemSpec.load(cfg["eval.truth"])
    except FileNotFoundError:
        raise ConfigError(f"truth file not found: {cfg['eval.truth']}") from None
    rows = []
    for path in [p for p in cfg["eval.graphs"].split(",") if p]:
        method, A, names = _load_graph(path)
        m = structural_metrics(A, truth_for(spec, names, A.shape))
        rows.append((method, m.shd, m.edge_precision, m.edge_recall, m.edge_f1))
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_rows(out / "metrics.csv", ["method", "shd", "precision", "recall", "f1"], rows)
    print("; ".join(f"{r[0]}: shd={r[1]} precision={r[2]:.3f} recall={r[3]:.3f} f1={r[4]:.3f}" for r in rows))
    return rows


# ---------------------------------------------------------------- entry


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="causalrank", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("discover", "run the discovery pipeline on a CSV cohort"),
        ("synth", "sample a ground-truth SEM dataset"),
        ("eval", "score estimated graphs against a ground-truth SEM"),
    ):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", help="key = value config file")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int, help="root seed")
        if name == "discover":
            sp.add_argument("--input", help="cohort CSV")
            sp.add_argument("--schema", help="name,kind schema CSV")
            sp.add_argument("--method", choices=("lingam", "notears", "both"))
            sp.add_argument("--importance", choices=("gbt", "logreg", "both"))
        if name == "eval":
            sp.add_argument("--truth", help="ground-truth SEM JSON")
            sp.add_argument("--graphs", nargs="+", help="adjacency JSON files")
    return parser


def parse_overrides(extra) -> dict:
    """``--section.key value`` / ``--section.key=value`` pairs."""
    out = {}
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--") or len(tok) < 3:
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, value = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise ConfigError(f"missing value for {tok}")
            value = extra[i + 1]
            i += 2
        if key not in config_mod.DEFAULTS:
            raise ConfigError(f"unknown option --{key}")
        out[key] = value
    return out


def resolve_config(args, extra) -> dict:
    overrides = parse_overrides(extra)
    for key in ("out", "seed", "input", "schema", "method", "importance"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "truth", None):
        overrides["eval.truth"] = args.truth
    if getattr(args, "graphs", None):
        overrides["eval.graphs"] = ",".join(args.graphs)
    return config_mod.load_config(args.config, overrides)


def main(argv=None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args, extra)
        if args.command == "discover":
            run_discover(cfg)
        elif args.command == "synth":
            run_synth(cfg)
        else:
            run_eval(cfg)
    except CausalRankError as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # noqa: BLE001
        print(f"internal error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
