"""SVG figures for run reports."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed ids and no timestamp, so identical data gives identical files
plt.rcParams["svg.hashsalt"] = "scrisk"
_META = {"Date": None, "Creator": "scrisk"}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)


def trajectory(steps, mean_esri, path, baseline=None):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(steps, mean_esri, lw=1.2, label="Metropolis-Hastings")
    if baseline is not None:
        ax.plot(baseline[0], baseline[1], lw=1.0, color="grey", label="beta = 0")
        ax.legend(frameon=False)
    ax.set_xlabel("step")
    ax.set_ylabel("<ESRI>")
    _save(fig, path)


def profile_bars(diff, path):
    """ESRI per firm before and after, ranked by each profile in turn."""
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5), sharey=True)
    for ax, order, title in ((axes[0], diff.empirical_order, "ranked by empirical ESRI"),
                             (axes[1], diff.rewired_order, "ranked by rewired ESRI")):
        x = np.arange(1, len(order) + 1)
        ax.bar(x, diff.before[order], width=1.0, color="tab:red", alpha=0.5, label="empirical")
        ax.bar(x, diff.after[order], width=1.0, color="tab:blue", alpha=0.5, label="rewired")
        ax.set_title(title, fontsize=9)
        ax.set_xlabel("firm rank")
    axes[0].set_ylabel("ESRI")
    axes[0].legend(frameon=False)
    _save(fig, path)


def degree_vs_esri(degree, esri, path):
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ax.scatter(np.maximum(degree, 1), esri, s=8, alpha=0.6)
    ax.set_xscale("log")
    ax.set_xlabel("total degree")
    ax.set_ylabel("ESRI")
    _save(fig, path)
