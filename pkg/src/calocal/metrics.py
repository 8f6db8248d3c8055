"""Scores for coefficient recovery and energy-sum alignment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .showersim import event_array


def _pair(pred, truth):
    pred = np.asarray(pred, dtype=np.float64).ravel()
    truth = np.asarray(truth, dtype=np.float64).ravel()
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.size} predictions, {truth.size} truth values")
    return pred, truth


def mae(pred, truth) -> float:
    pred, truth = _pair(pred, truth)
    if pred.size == 0:
        raise ValueError("mae of empty arrays")
    return float(np.mean(np.abs(pred - truth)))


def r_squared(pred, truth) -> float:
    """Coefficient of determination of ``pred`` against ``truth``."""
    pred, truth = _pair(pred, truth)
    if pred.size < 2:
        raise ValueError("r_squared needs at least two points")
    ss_tot = np.sum((truth - truth.mean()) ** 2)
    if ss_tot == 0:
        raise ValueError("r_squared is undefined for constant truth")
    return float(1.0 - np.sum((pred - truth) ** 2) / ss_tot)


def energy_sum(e) -> np.ndarray:
    """Total energy per event."""
    events = event_array(e)
    return events.reshape(events.shape[0], -1).sum(axis=1)


def wasserstein1_empirical(a, b) -> float:
    """W1 between two empirical samples with uniform weights.

    Integrates ``|F_a - F_b|`` over the merged sorted support.
    """
    a = np.sort(np.asarray(a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(b, dtype=np.float64).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("wasserstein1_empirical needs non-empty samples")
    if a.size == b.size:
        return float(np.mean(np.abs(a - b)))
    support = np.concatenate([a, b])
    support.sort(kind="mergesort")
    widths = np.diff(support)
    cdf_a = np.searchsorted(a, support[:-1], side="right") / a.size
    cdf_b = np.searchsorted(b, support[:-1], side="right") / b.size
    return float(np.sum(np.abs(cdf_a - cdf_b) * widths))


@dataclass
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    underflow: int = 0
    overflow: int = 0

    @property
    def total(self) -> int:
        return int(self.counts.sum()) + self.underflow + self.overflow


def histogram(values, n_bins: int, lo: float, hi: float) -> Histogram:
    """Uniform bins, left-closed; the last bin also takes ``hi``."""
    if n_bins < 1:
        raise ValueError(f"n_bins must be >= 1, got {n_bins}")
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    values = np.asarray(values, dtype=np.float64).ravel()
    edges = np.linspace(lo, hi, n_bins + 1)
    under = int(np.sum(values < lo))
    over = int(np.sum(values > hi))
    inside = values[(values >= lo) & (values <= hi)]
    idx = np.searchsorted(edges, inside, side="right") - 1
    idx = np.minimum(idx, n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins).astype(np.int64)
    return Histogram(edges, counts, under, over)


def auto_range(*samples):
    """Pooled min/max over several samples, widened when degenerate."""
    pooled = np.concatenate([np.asarray(s, dtype=np.float64).ravel() for s in samples])
    lo, hi = float(pooled.min()), float(pooled.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    return lo, hi
