"""Parametric toy showers on a rectangular readout grid.

A stand-in for full detector simulation: each event deposits a fixed
expected visible energy with an exponential radial profile around a
jittered impact point, and every cell gets independent Gamma noise.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DetectorGeometry:
    n_rows: int = 24
    n_cols: int = 24
    cell_pitch: float = 30.0  # mm, metadata only

    def __post_init__(self):
        if self.n_rows < 2 or self.n_cols < 2:
            raise ValueError(f"grid must be at least 2x2, got {self.n_rows}x{self.n_cols}")

    @property
    def n_cells(self) -> int:
        return self.n_rows * self.n_cols

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)


@dataclass(frozen=True)
class ShowerModel:
    visible_fraction: float = 0.02
    radius: float = 2.5
    center_spread: float = 1.5
    fluctuation_shape: float = 2.0
    sparsity_threshold: float = 0.05

    def __post_init__(self):
        for name in ("visible_fraction", "radius", "center_spread",
                     "fluctuation_shape", "sparsity_threshold"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if not 0 < self.visible_fraction <= 1:
            raise ValueError(f"visible_fraction must lie in (0, 1], got {self.visible_fraction}")
        if self.radius <= 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if self.center_spread < 0:
            raise ValueError(f"center_spread must be non-negative, got {self.center_spread}")
        if self.fluctuation_shape <= 0:
            raise ValueError(f"fluctuation_shape must be positive, got {self.fluctuation_shape}")
        if self.sparsity_threshold < 0:
            raise ValueError(f"sparsity_threshold must be non-negative, got {self.sparsity_threshold}")


@dataclass
class EventSet:
    """Cell energies in MeV, shape ``(n_events, n_rows, n_cols)``."""

    geometry: DetectorGeometry
    events: np.ndarray
    beam_energy: float
    seed: int

    def __post_init__(self):
        self.events = np.asarray(self.events, dtype=np.float64)
        if self.events.ndim != 3 or self.events.shape[1:] != self.geometry.shape:
            raise ValueError(f"events of shape {self.events.shape} do not fit a "
                             f"{self.geometry.n_rows}x{self.geometry.n_cols} grid")
        if self.events.shape[0] < 1:
            raise ValueError("an event set needs at least one event")

    @property
    def n_events(self) -> int:
        return self.events.shape[0]

    def flat(self) -> np.ndarray:
        """View with one row per event, cells in row-major order."""
        return self.events.reshape(self.n_events, -1)

    def replace(self, events) -> EventSet:
        return EventSet(self.geometry, events, self.beam_energy, self.seed)


def _event_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, index])


def _simulate_range(geom, model, start, stop, beam_energy, seed):
    rows = np.arange(geom.n_rows) + 0.5
    cols = np.arange(geom.n_cols) + 0.5
    r0, c0 = geom.n_rows / 2.0, geom.n_cols / 2.0
    total = model.visible_fraction * beam_energy * 1000.0
    k = model.fluctuation_shape
    out = np.empty((stop - start, geom.n_rows, geom.n_cols))
    for j, index in enumerate(range(start, stop)):
        rng = _event_rng(seed, index)
        dr, dc = rng.normal(0.0, 1.0, size=2) * model.center_spread
        dist = np.hypot(rows[:, None] - (r0 + dr), cols[None, :] - (c0 + dc))
        profile = np.exp(-dist / model.radius)
        mean = total * profile / profile.sum()
        cell = mean * rng.gamma(k, 1.0 / k, size=mean.shape)
        cell[cell < model.sparsity_threshold] = 0.0
        out[j] = cell
    return out


def simulate_events(geom: DetectorGeometry, model: ShowerModel, n_events: int,
                    beam_energy: float = 10.0, seed: int = 0, workers: int = 1,
                    start: int = 0) -> EventSet:
    """Generate events ``start .. start + n_events - 1``.

    Every event draws from its own generator keyed on ``(seed, index)``, so
    the output does not depend on ``workers`` or on how a run is chunked.
    """
    if n_events < 1:
        raise ValueError(f"n_events must be >= 1, got {n_events}")
    if not beam_energy > 0:
        raise ValueError(f"beam energy must be positive, got {beam_energy}")
    stop = start + n_events
    if workers <= 1 or n_events < 2 * workers:
        events = _simulate_range(geom, model, start, stop, beam_energy, seed)
    else:
        edges = np.linspace(start, stop, workers + 1).astype(int)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(lambda ab: _simulate_range(geom, model, ab[0], ab[1], beam_energy, seed),
                             zip(edges[:-1], edges[1:]))
            events = np.concatenate(list(parts))
    return EventSet(geom, events, float(beam_energy), int(seed))


def event_array(e) -> np.ndarray:
    """Raw events from an ``EventSet`` or anything array-like."""
    return e.events if isinstance(e, EventSet) else np.asarray(e, dtype=np.float64)


def integrated_dose(e) -> np.ndarray:
    """Per-cell energy summed over all events (axis 0)."""
    events = event_array(e)
    if events.ndim < 1 or events.shape[0] < 1:
        raise ValueError("empty event set")
    return events.sum(axis=0)
