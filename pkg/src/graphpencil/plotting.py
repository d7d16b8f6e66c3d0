"""Static figures for experiment and variance-check results.

Uses the object-oriented matplotlib API on an Agg canvas, so nothing
touches global pyplot state and no display is needed.
"""

from __future__ import annotations

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

# method -> (colour, marker, label)
STYLE = {
    "bistar": ("tab:green", "s", "bistars"),
    "two_hop": ("tab:purple", "o", "bistars + two-hop"),
}
BASELINE_COLOR = "tab:orange"


def _save(fig, path, dpi):
    FigureCanvasAgg(fig)
    # no timestamps or version strings, so reruns give identical files
    fig.savefig(path, dpi=dpi, metadata={"Software": None})


def plot_experiment(result, path, title=None, dpi=120):
    """Mean squared error against n on log-log axes.

    The band around each curve is ``exp(log(mean) +- stdev/mean)``, a
    one-standard-deviation spread made symmetric on the log scale.  The
    dashed line is the known-blocks baseline.
    """
    fig = Figure(figsize=(4.5, 3.6))
    ax = fig.add_subplot(1, 1, 1)
    sizes = np.array(result.spec.sizes, dtype=float)
    for method in result.spec.methods:
        rows = result.summary_for(method)
        mean = np.array([r["mean_sq_error"] for r in rows])
        lo = np.exp([r["log_lower"] for r in rows])
        hi = np.exp([r["log_upper"] for r in rows])
        color, marker, label = STYLE.get(method, ("k", "x", method))
        ax.plot(sizes, mean, marker=marker, color=color, label=label)
        ax.fill_between(sizes, lo, hi, color=color, alpha=0.2, linewidth=0)
    ax.plot(sizes, result.baselines(), "--", color=BASELINE_COLOR, label="known blocks")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xticks(sizes)
    ax.set_xticklabels([str(int(s)) for s in sizes])
    ax.minorticks_off()
    ax.set_xlabel("number of nodes n")
    ax.set_ylabel(r"squared error $\pi^\top (\Delta B)^2 \pi$")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False, fontsize="small")
    fig.tight_layout()
    _save(fig, path, dpi)
    return path


def plot_variance_check(result, path, dpi=120):
    """Histogram of jackknife estimates per glyph with the observed variance marked."""
    ng = len(result.glyphs)
    fig = Figure(figsize=(3.6 * ng, 3.2))
    for j, g in enumerate(result.glyphs):
        ax = fig.add_subplot(1, ng, j + 1)
        ax.hist(result.jackknife[:, j], bins=30, color="0.6")
        row = result.rows[j]
        ax.axvline(row["empirical_variance"], color="tab:red", label="observed variance")
        ax.axvline(row["median_jackknife"], color="k", linestyle="--", label="median jackknife")
        ax.set_title(f"{g}  (ratio {row['ratio']:.2f})")
        ax.set_xlabel("variance of density")
        if j == 0:
            ax.legend(frameon=False, fontsize="small")
    fig.tight_layout()
    _save(fig, path, dpi)
    return path
