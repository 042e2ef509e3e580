# analysis/render.py
"""
SVG renderings of heatmaps, saturation scatter plots and activation box plots.
"""
import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from numcore.fileio import atomic_write_bytes  # noqa: E402
from analysis.activations import SaturationStats  # noqa: E402

# fixed ids and no timestamp, so identical inputs give identical files
plt.rcParams.update({
    "svg.hashsalt": "lookup-lab",
    "svg.fonttype": "none",
    "figure.dpi": 100,
    "savefig.bbox": "tight",
    "font.size": 9,
})


def _save(fig, path: Path) -> Path:
    buf = io.BytesIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return atomic_write_bytes(Path(path), buf.getvalue())


def render_heatmap(grid: np.ndarray, path: Path, title: str = "",
                   rows: str = "receiving unit", cols: str = "sending unit") -> Path:
    lim = float(np.abs(grid).max()) or 1.0
    fig, ax = plt.subplots(figsize=(6, 6 * min(grid.shape[0] / max(grid.shape[1], 1), 2.0) + 0.5))
    im = ax.imshow(grid, cmap="coolwarm", vmin=-lim, vmax=lim, aspect="auto", interpolation="nearest")
    fig.colorbar(im, ax=ax)
    ax.set_xlabel(cols)
    ax.set_ylabel(rows)
    ax.set_title(title)
    return _save(fig, path)


def render_saturation(stats: SaturationStats, path: Path, title: str = "") -> Path:
    """One point per gate unit: left-saturated vs right-saturated share."""
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.scatter(stats.left, stats.right, s=6, alpha=0.6)
    ax.plot([0, 1], [1, 0], color="grey", linewidth=0.5)
    ax.set_xlim(-0.02, 1.02)
    ax.set_ylim(-0.02, 1.02)
    ax.set_xlabel("fraction left-saturated")
    ax.set_ylabel("fraction right-saturated")
    ax.set_title(title or stats.array)
    return _save(fig, path)


def render_distributions(summary: pd.DataFrame, path: Path, title: str = "") -> Path:
    """Quartile boxes with whiskers spanning the full range (min to max)."""
    stats = [
        {"med": r.median, "q1": r.q1, "q3": r.q3, "whislo": r.min, "whishi": r.max,
         "fliers": [], "label": str(r.unit)}
        for r in summary.itertuples()
    ]
    fig, ax = plt.subplots(figsize=(10, 3))
    ax.bxp(stats, showfliers=False)
    ax.set_xlabel("unit")
    ax.set_ylabel("activation")
    ax.tick_params(axis="x", labelrotation=90, labelsize=6)
    ax.set_title(title)
    return _save(fig, path)
