"""Adversarial recovery of per-cell aging coefficients.

The generator is a diagonal multiplicative layer ``y_i = exp(u_i) * x_i``
applied to undamaged events; ``exp(u)`` are the predicted response
ratios. A weight-clipped MLP critic scores damaged ("real") against
transformed undamaged ("fake") events, and the generator moves ``u`` to
lower the critic's estimate of the Wasserstein distance.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Optional, Union

import numpy as np

from .aging import AgingProfile
from .errors import NumericError, ShapeError, TrainingError
from .metrics import mae, r_squared
from .ndcore import (MlpParams, OptState, clip_weights, init_mlp, mlp_backward,
                     mlp_forward, rmsprop_step)
from .showersim import DetectorGeometry, EventSet

log = logging.getLogger(__name__)

BASELINE_EPS = 1e-9


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 64
    n_critic: int = 5
    clip: float = 0.01
    critic_hidden: tuple = (128, 64)
    lr_critic: float = 5e-5
    lr_generator: float = 1e-3
    mask_half_width: int = 6
    scale: Union[float, str] = "auto"
    seed: int = 0

    def __post_init__(self):
        self.critic_hidden = tuple(int(h) for h in self.critic_hidden)
        if self.epochs < 1 or self.batch_size < 1 or self.n_critic < 1:
            raise ValueError("epochs, batch_size and n_critic must all be >= 1")
        if not self.clip > 0:
            raise ValueError(f"clip must be positive, got {self.clip}")
        if any(h < 1 for h in self.critic_hidden):
            raise ValueError("critic hidden sizes must be positive")
        if self.scale != "auto" and not float(self.scale) > 0:
            raise ValueError(f"scale must be 'auto' or a positive number, got {self.scale}")


@dataclass
class GeneratorParams:
    u: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=np.float64).ravel()
        self.mask = np.asarray(self.mask, dtype=np.int64).ravel()
        if self.u.shape != self.mask.shape:
            raise ShapeError(f"{self.u.size} log-coefficients for {self.mask.size} masked cells")
        if np.unique(self.mask).size != self.mask.size:
            raise ValueError("mask indices must be unique")

    @property
    def coefficients(self) -> np.ndarray:
        return np.exp(self.u)


@dataclass
class EpochRecord:
    epoch: int
    critic_loss: float
    generator_loss: float
    wasserstein_estimate: float
    mae_vs_truth: Optional[float] = None
    r2_vs_truth: Optional[float] = None


@dataclass
class TrainReport:
    records: list
    coefficients: np.ndarray  # full grid, masked cells from training
    mask: np.ndarray
    masked_coefficients: np.ndarray
    border_coefficients: np.ndarray
    scale: float
    config: TrainConfig
    seconds: float = field(default=0.0, compare=False)

    def mae_series(self) -> np.ndarray:
        return np.array([np.nan if r.mae_vs_truth is None else r.mae_vs_truth
                         for r in self.records])


def central_mask(geom: DetectorGeometry, half_width: int) -> np.ndarray:
    """Flat row-major indices of the centred ``2h x 2h`` block."""
    h = int(half_width)
    if h < 1 or 2 * h > min(geom.n_rows, geom.n_cols):
        raise ValueError(f"half width {half_width} does not fit a {geom.n_rows}x{geom.n_cols} grid")
    r0 = geom.n_rows // 2 - h
    c0 = geom.n_cols // 2 - h
    rows = np.arange(r0, r0 + 2 * h)
    cols = np.arange(c0, c0 + 2 * h)
    return (rows[:, None] * geom.n_cols + cols[None, :]).ravel()


def generator_apply(g: GeneratorParams, batch) -> np.ndarray:
    batch = np.asarray(batch, dtype=np.float64)
    if batch.shape[-1] != g.u.size:
        raise ShapeError(f"batch has {batch.shape[-1]} columns, generator has {g.u.size} cells")
    return batch * np.exp(g.u)


def critic_loss_and_grads(critic: MlpParams, real_batch, fake_batch):
    """``mean C(fake) - mean C(real)`` and its parameter gradients."""
    real_batch = np.asarray(real_batch, dtype=np.float64)
    fake_batch = np.asarray(fake_batch, dtype=np.float64)
    if real_batch.ndim != 2 or fake_batch.ndim != 2 or len(real_batch) == 0 or len(fake_batch) == 0:
        raise ValueError("critic needs non-empty 2-D real and fake batches")
    s_real, cache_real = mlp_forward(real_batch, critic)
    s_fake, cache_fake = mlp_forward(fake_batch, critic)
    loss = float(s_fake.mean() - s_real.mean())
    g_real, _ = mlp_backward(cache_real, critic, -1.0 / len(real_batch))
    g_fake, _ = mlp_backward(cache_fake, critic, 1.0 / len(fake_batch))
    grads = [a + b for a, b in zip(g_real.arrays(), g_fake.arrays())]
    return loss, critic.with_arrays(grads)


def generator_loss_and_grads(critic: MlpParams, g: GeneratorParams, undamaged_batch):
    """``-mean C(G(x))`` and its gradient with respect to ``u``."""
    x = np.asarray(undamaged_batch, dtype=np.float64)
    if x.ndim != 2 or len(x) == 0:
        raise ValueError("generator needs a non-empty 2-D batch")
    y = generator_apply(g, x)
    scores, cache = mlp_forward(y, critic)
    _, dy = mlp_backward(cache, critic, -1.0 / len(x))
    return float(-scores.mean()), np.sum(dy * y, axis=0)


def ratio_of_means_baseline(undamaged, damaged, eps: float = BASELINE_EPS) -> np.ndarray:
    """Per-cell ``mean(damaged) / mean(undamaged)``; 1 where undamaged is empty."""
    u = undamaged.events if isinstance(undamaged, EventSet) else np.asarray(undamaged, dtype=np.float64)
    d = damaged.events if isinstance(damaged, EventSet) else np.asarray(damaged, dtype=np.float64)
    if u.shape[1:] != d.shape[1:]:
        raise ShapeError(f"cell layouts differ: {u.shape[1:]} vs {d.shape[1:]}")
    mu, md = u.mean(axis=0), d.mean(axis=0)
    out = np.ones_like(mu)
    ok = mu > eps
    out[ok] = md[ok] / mu[ok]
    return out


def auto_scale(e: EventSet) -> float:
    """Mean of the non-zero cell energies."""
    nz = e.events[e.events > 0]
    return float(nz.mean()) if nz.size else 1.0


class _BatchStream:
    """Endless shuffled index batches; reshuffles after each full pass."""

    def __init__(self, n, batch_size, rng):
        self.n, self.batch_size, self.rng = n, batch_size, rng
        self._perm = rng.permutation(n)
        self._pos = 0

    def next(self):
        if self._pos + self.batch_size > self.n:
            self._perm = self.rng.permutation(self.n)
            self._pos = 0
        idx = self._perm[self._pos:self._pos + self.batch_size]
        self._pos += self.batch_size
        return idx


def _check_finite(value, what, epoch):
    if not np.isfinite(value):
        raise TrainingError(f"{what} became non-finite in epoch {epoch}", epoch)


def train_calibration(undamaged: EventSet, damaged: EventSet, cfg: TrainConfig = None,
                      truth: Optional[AgingProfile] = None, progress=None):
    """Learn response ratios mapping ``undamaged`` onto ``damaged``.

    Each epoch runs ``n_damaged // batch_size`` generator updates, each
    preceded by ``n_critic`` clipped critic updates. Cells outside the
    central mask take the ratio-of-means estimate. Returns
    ``(coefficients, report)`` with coefficients on the detector grid.
    """
    cfg = cfg or TrainConfig()
    if undamaged.geometry.shape != damaged.geometry.shape:
        raise ShapeError("undamaged and damaged sets have different geometries")
    for name, e in (("undamaged", undamaged), ("damaged", damaged)):
        if e.n_events < cfg.batch_size:
            raise ValueError(f"{name} set has {e.n_events} events, fewer than batch size {cfg.batch_size}")
    t0 = time.perf_counter()
    geom = undamaged.geometry
    mask = central_mask(geom, cfg.mask_half_width)
    scale = auto_scale(undamaged) if cfg.scale == "auto" else float(cfg.scale)
    xu = undamaged.flat()[:, mask] / scale
    xd = damaged.flat()[:, mask] / scale
    truth_masked = None if truth is None else truth.a.ravel()[mask]

    rng = np.random.default_rng(cfg.seed)
    critic = init_mlp(mask.size, cfg.critic_hidden, rng, scale=cfg.clip)
    c_state = OptState.zeros_like(critic.arrays(), lr=cfg.lr_critic)
    gen = GeneratorParams(np.zeros(mask.size), mask)
    g_state = OptState.zeros_like([gen.u], lr=cfg.lr_generator)
    real_stream = _BatchStream(len(xd), cfg.batch_size, rng)
    fake_stream = _BatchStream(len(xu), cfg.batch_size, rng)
    gen_stream = _BatchStream(len(xu), cfg.batch_size, rng)
    steps = max(1, len(xd) // cfg.batch_size)

    records = []
    for epoch in range(1, cfg.epochs + 1):
        c_losses, g_losses = [], []
        try:
            for _ in range(steps):
                for _ in range(cfg.n_critic):
                    real = xd[real_stream.next()]
                    fake = generator_apply(gen, xu[fake_stream.next()])
                    c_loss, grads = critic_loss_and_grads(critic, real, fake)
                    _check_finite(c_loss, "critic loss", epoch)
                    arrays, c_state = rmsprop_step(critic.arrays(), grads.arrays(), c_state)
                    critic = clip_weights(critic.with_arrays(arrays), cfg.clip)
                    c_losses.append(c_loss)
                g_loss, grad_u = generator_loss_and_grads(critic, gen, xu[gen_stream.next()])
                _check_finite(g_loss, "generator loss", epoch)
                (u,), g_state = rmsprop_step([gen.u], [grad_u], g_state)
                gen = GeneratorParams(u, mask)
                g_losses.append(g_loss)
        except NumericError as exc:
            raise TrainingError(f"training diverged in epoch {epoch}: {exc}", epoch) from exc

        s_real, _ = mlp_forward(xd, critic)
        s_fake, _ = mlp_forward(generator_apply(gen, xu), critic)
        w_est = float(s_real.mean() - s_fake.mean())
        _check_finite(w_est, "Wasserstein estimate", epoch)
        rec = EpochRecord(epoch, float(np.mean(c_losses)), float(np.mean(g_losses)), w_est)
        if truth_masked is not None:
            rec.mae_vs_truth = mae(gen.coefficients, truth_masked)
            if np.ptp(truth_masked) > 0:
                rec.r2_vs_truth = r_squared(gen.coefficients, truth_masked)
        records.append(rec)
        log.debug("epoch %d: %s", epoch, asdict(rec))
        if progress is not None:
            progress(rec)

    coeffs = ratio_of_means_baseline(undamaged, damaged).ravel()
    coeffs[~(coeffs > 0)] = 1.0  # cells that went dark keep calibrate well defined
    border = np.setdiff1d(np.arange(geom.n_cells), mask)
    coeffs[mask] = gen.coefficients
    report = TrainReport(records, coeffs.reshape(geom.shape), mask, gen.coefficients.copy(),
                         coeffs[border].copy(), scale, cfg, time.perf_counter() - t0)
    return coeffs.reshape(geom.shape), report
