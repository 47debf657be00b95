"""Report figures rendered to PNG files with the non-interactive backend."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.5),
    "figure.dpi": 100,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
    "axes.grid": True,
    "grid.alpha": 0.2,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "xtick.direction": "in",
    "ytick.direction": "in",
    "font.size": 9,
    "legend.frameon": False,
}


def savefig(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def likelihood_histogram(scores, labels, path) -> Path:
    """Score distribution split by the binary label."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    bins = np.linspace(0.0, 1.0, 26)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for cls, color in ((0, "tab:blue"), (1, "tab:red")):
            ax.hist(scores[labels == cls], bins=bins, alpha=0.6, color=color, label=f"label {cls}")
        ax.axvline(0.5, color="k", lw=0.8, ls="--")
        ax.set_xlabel("likelihood score")
        ax.set_ylabel("count")
        ax.legend(loc="upper center")
        return savefig(fig, path)


def adjacency_heatmap(A, names, path, title="") -> Path:
    """Edge strengths, row = source, column = target."""
    A = np.asarray(A, dtype=float)
    lim = float(np.abs(A).max()) or 1.0
    n = len(names)
    with plt.rc_context(STYLE | {"axes.grid": False, "figure.figsize": (1.2 + 0.45 * n, 1.0 + 0.45 * n)}):
        fig, ax = plt.subplots()
        im = ax.imshow(A, cmap="RdBu_r", vmin=-lim, vmax=lim)
        ax.set_xticks(range(n), names, rotation=90)
        ax.set_yticks(range(n), names)
        ax.set_xlabel("effect")
        ax.set_ylabel("cause")
        if title:
            ax.set_title(title)
        fig.colorbar(im, ax=ax, shrink=0.8)
        return savefig(fig, path)


def concordance_bars(rows, alpha, path) -> Path:
    """Spearman rho per compared pair; filled bars are significant at ``alpha``."""
    labels = [f"{r.method}: {r.x} vs {r.y}" for r in rows]
    rho = np.array([r.rho for r in rows], dtype=float)
    with plt.rc_context(STYLE | {"figure.figsize": (5.0, 0.6 + 0.3 * max(len(rows), 1))}):
        fig, ax = plt.subplots()
        y = np.arange(len(rows))
        colors = ["tab:green" if r.significant else "0.7" for r in rows]
        ax.barh(y, np.nan_to_num(rho), color=colors)
        ax.set_yticks(y, labels)
        ax.invert_yaxis()
        ax.set_xlim(-1.0, 1.0)
        ax.axvline(0.0, color="k", lw=0.6)
        ax.set_xlabel(f"Spearman rho (green: p < {alpha:g})")
        return savefig(fig, path)
