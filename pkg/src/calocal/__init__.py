"""Calorimeter aging calibration with a WGAN-style per-cell generator."""

from .aging import AgingProfile, apply_damage, calibrate, make_aged_pair, make_linear_profile
from .metrics import energy_sum, mae, r_squared, wasserstein1_empirical
from .showersim import DetectorGeometry, EventSet, ShowerModel, integrated_dose, simulate_events
from .wgan import TrainConfig, TrainReport, ratio_of_means_baseline, train_calibration

__version__ = "0.1.0"
