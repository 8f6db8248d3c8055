"""Matplotlib renderings of the report data. Each function writes one PNG."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 10,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": (5.0, 3.6),
    "savefig.dpi": 120,
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def _step(ax, h, label, **kw):
    ax.stairs(h.counts, h.edges, label=label, **kw)


def coefficient_histogram(path, h, xlabel="aging coefficient a"):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        _step(ax, h, None, fill=True, alpha=0.6)
        ax.set_xlabel(xlabel)
        ax.set_ylabel("cells")
        _save(fig, path)


def energy_sums(path, hists: dict, title=None):
    """Overlay energy-sum histograms that share one binning."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for label, h in hists.items():
            _step(ax, h, label, linewidth=1.4)
        ax.set_xlabel("event energy sum [MeV]")
        ax.set_ylabel("events")
        if title:
            ax.set_title(title)
        ax.legend(frameon=False)
        _save(fig, path)


def truth_vs_predicted(path, truth, pred):
    truth, pred = np.asarray(truth), np.asarray(pred)
    lo = min(truth.min(), pred.min())
    hi = max(truth.max(), pred.max())
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.2, 4.0))
        ax.plot([lo, hi], [lo, hi], color="0.5", linewidth=1, linestyle="--")
        ax.scatter(truth, pred, s=8, alpha=0.7)
        ax.set_xlabel("true coefficient")
        ax.set_ylabel("predicted coefficient")
        ax.set_aspect("equal", adjustable="box")
        _save(fig, path)


def mae_curve(path, epochs, mae):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(epochs, mae, marker=".", markersize=3)
        ax.set_xlabel("epoch")
        ax.set_ylabel("MAE of coefficients")
        _save(fig, path)
