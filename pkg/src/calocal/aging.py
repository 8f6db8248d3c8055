"""Synthetic dose-linear aging and cell-level calibration.

Coefficients are stored as response ratios ``a = damaged / undamaged`` in
``(0, 1]``; ``AgingProfile.A`` gives the reciprocal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .showersim import (DetectorGeometry, EventSet, ShowerModel, event_array,
                        integrated_dose, simulate_events)


@dataclass
class AgingProfile:
    a: np.ndarray

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=np.float64)
        if not np.all((self.a > 0) & (self.a <= 1)):
            raise ValueError("aging coefficients must lie in (0, 1]")

    @property
    def A(self) -> np.ndarray:
        """Undamaged over damaged response, ``1 / a``."""
        return 1.0 / self.a


def make_linear_profile(dose, k: float = 0.3, a_min: float = 0.5) -> AgingProfile:
    """``a_i = max(1 - k * D_i / max(D), a_min)``."""
    dose = np.asarray(dose, dtype=np.float64)
    if np.any(dose < 0) or not np.all(np.isfinite(dose)):
        raise ValueError("dose must be finite and non-negative")
    peak = dose.max() if dose.size else 0.0
    if not peak > 0:
        raise ValueError("dose is zero everywhere; nothing to age")
    if not 0 <= k < 1:
        raise ValueError(f"slope k must lie in [0, 1), got {k}")
    if not 0 < a_min <= 1:
        raise ValueError(f"floor a_min must lie in (0, 1], got {a_min}")
    return AgingProfile(np.maximum(1.0 - k * dose / peak, a_min))


def _coeffs(p):
    return p.a if isinstance(p, AgingProfile) else np.asarray(p, dtype=np.float64)


def _rewrap(e, events):
    return e.replace(events) if isinstance(e, EventSet) else events


def apply_damage(e, p):
    """Scale every cell by its response ratio."""
    events, a = event_array(e), _coeffs(p)
    if events.shape[1:] != a.shape:
        raise ValueError(f"profile shape {a.shape} does not match cells {events.shape[1:]}")
    return _rewrap(e, events * a)


def calibrate(e, coeffs):
    """Undo aging: divide every cell by its coefficient."""
    events, a = event_array(e), _coeffs(coeffs)
    if events.shape[1:] != a.shape:
        raise ValueError(f"coefficient shape {a.shape} does not match cells {events.shape[1:]}")
    bad = np.argwhere(~(a > 0))
    if bad.size:
        raise ValueError(f"non-positive calibration coefficient at cell {tuple(int(i) for i in bad[0])}")
    return _rewrap(e, events / a)


def independent_seed(seed: int) -> int:
    """Seed for the second (damaged) draw of an independent pair."""
    return int(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, 0xDA]).generate_state(1, np.uint64)[0])


def make_aged_pair(geom: DetectorGeometry, model: ShowerModel, n_events: int,
                   beam_energy: float = 10.0, seed: int = 0, k: float = 0.3,
                   a_min: float = 0.5, shared: bool = False, workers: int = 1):
    """Simulate an undamaged set and a damaged counterpart.

    The profile is built from the undamaged set's dose. With ``shared`` the
    damaged set is the same showers scaled; otherwise the showers are an
    independent draw. Returns ``(undamaged, damaged, profile)``.
    """
    undamaged = simulate_events(geom, model, n_events, beam_energy, seed, workers)
    profile = make_linear_profile(integrated_dose(undamaged), k, a_min)
    if shared:
        source = undamaged
    else:
        source = simulate_events(geom, model, n_events, beam_energy, independent_seed(seed), workers)
    return undamaged, apply_damage(source, profile), profile
