"""``calocal`` command line: simulate -> damage -> calibrate -> evaluate -> report.

Exit codes: 0 success, 2 usage or config error, 3 data or format error,
4 training divergence. Diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import fileio, plotting
from .aging import AgingProfile, apply_damage, calibrate, independent_seed, make_linear_profile
from .config import RunConfig, load_config
from .errors import ConfigError, FormatError, TrainingError
from .metrics import (auto_range, energy_sum, histogram, mae, r_squared,
                      wasserstein1_empirical)
from .showersim import DetectorGeometry, integrated_dose, simulate_events
from .wgan import central_mask, train_calibration

log = logging.getLogger("calocal")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED = 0, 2, 3, 4


def _workers() -> int:
    raw = os.environ.get("CALOCAL_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"CALOCAL_THREADS must be an integer, got {raw!r}")


def _resolve(args) -> RunConfig:
    cfg = load_config(getattr(args, "config", None))
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _read(path, cfg: RunConfig = None):
    pitch = cfg.detector.cell_pitch if cfg else DetectorGeometry.cell_pitch
    return fileio.read_events(path, pitch)


def _check_grid(e, cfg: RunConfig, path):
    if e.geometry.shape != cfg.detector.shape:
        raise FormatError(f"{path}: grid {e.geometry.shape} does not match configured "
                          f"{cfg.detector.shape}")


def cmd_simulate(cfg: RunConfig, out_path, csv_path=None) -> int:
    e = simulate_events(cfg.detector, cfg.shower, cfg.sim.n_events, cfg.sim.beam_energy,
                        cfg.sim.seed, workers=_workers())
    fileio.write_events(out_path, e)
    if csv_path:
        fileio.export_events_csv(csv_path, e)
    log.info("wrote %d events to %s", e.n_events, out_path)
    return EXIT_OK


def cmd_damage(cfg: RunConfig, in_path, out_path, profile_out) -> int:
    """Age ``in_path`` with a dose-linear profile built from its own dose.

    Unless ``shared_showers`` is set, the damaged file holds an independent
    draw of the same size, beam energy and shower model.
    """
    undamaged = _read(in_path, cfg)
    _check_grid(undamaged, cfg, in_path)
    profile = make_linear_profile(integrated_dose(undamaged), cfg.aging.k, cfg.aging.a_min)
    if cfg.aging.shared_showers:
        source = undamaged
    else:
        source = simulate_events(undamaged.geometry, cfg.shower, undamaged.n_events,
                                 undamaged.beam_energy, independent_seed(undamaged.seed),
                                 workers=_workers())
    damaged = apply_damage(source, profile)
    fileio.write_events(out_path, damaged)
    fileio.write_coefficients(profile_out, profile.a)
    log.info("damaged %d events, coefficients in [%.4f, %.4f]", damaged.n_events,
             profile.a.min(), profile.a.max())
    return EXIT_OK


def _truth(path, shape):
    if path is None:
        return None
    a = fileio.read_coefficients(path)
    if a.shape != shape:
        raise FormatError(f"{path}: coefficient grid {a.shape} does not match events {shape}")
    try:
        return AgingProfile(a)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def cmd_calibrate(cfg: RunConfig, undamaged_path, damaged_path, coeffs_out, report_out,
                  truth_path=None) -> int:
    undamaged = _read(undamaged_path, cfg)
    damaged = _read(damaged_path, cfg)
    _check_grid(undamaged, cfg, undamaged_path)
    _check_grid(damaged, cfg, damaged_path)
    truth = _truth(truth_path, undamaged.geometry.shape)

    def progress(rec):
        log.info("epoch %3d  critic %.3e  generator %.3e  W %.3e%s", rec.epoch, rec.critic_loss,
                 rec.generator_loss, rec.wasserstein_estimate,
                 "" if rec.mae_vs_truth is None else f"  MAE {rec.mae_vs_truth:.5f}")

    coeffs, report = train_calibration(undamaged, damaged, cfg.train, truth, progress)
    text = fileio.report_lines(report, cfg.echo())
    # write both outputs to temp names first so a failure leaves neither
    with fileio.atomic_write(coeffs_out, "w") as fc, fileio.atomic_write(report_out, "w") as fr:
        fr.write(text)
        fc.write(fileio.coefficients_text(coeffs))
    log.info("training took %.1f s", report.seconds)
    return EXIT_OK


def evaluate(cfg: RunConfig, undamaged, damaged, coeffs, truth=None) -> dict:
    """MAE/R2 on the training mask (when truth is known) and W1 of event
    energy sums before and after calibrating the damaged set."""
    ref = energy_sum(undamaged)
    before = wasserstein1_empirical(energy_sum(damaged), ref)
    after = wasserstein1_empirical(energy_sum(calibrate(damaged, coeffs)), ref)
    out = {"w1_before": before, "w1_after": after,
           "w1_ratio": after / before if before > 0 else None}
    if truth is not None:
        mask = central_mask(undamaged.geometry, cfg.train.mask_half_width)
        pred_m, true_m = coeffs.ravel()[mask], truth.a.ravel()[mask]
        out["mae"] = mae(pred_m, true_m)
        out["r2"] = r_squared(pred_m, true_m) if np.ptp(true_m) > 0 else None
        out["mae_all_cells"] = mae(coeffs, truth.a)
        out["n_masked"] = int(mask.size)
    return out


def cmd_evaluate(cfg: RunConfig, damaged_path, undamaged_path, coeffs_path, metrics_out,
                 truth_path=None) -> int:
    damaged = _read(damaged_path, cfg)
    undamaged = _read(undamaged_path, cfg)
    coeffs = fileio.read_coefficients(coeffs_path)
    if coeffs.shape != damaged.geometry.shape:
        raise FormatError(f"{coeffs_path}: grid {coeffs.shape} does not match events")
    truth = _truth(truth_path, damaged.geometry.shape)
    metrics = evaluate(cfg, undamaged, damaged, coeffs, truth)
    metrics["config"] = cfg.echo()
    with fileio.atomic_write(metrics_out, "w") as fh:
        fh.write(json.dumps(metrics, sort_keys=True, indent=2) + "\n")
    log.info("W1 before %.4g, after %.4g", metrics["w1_before"], metrics["w1_after"])
    return EXIT_OK


def cmd_report(report_path, figures_dir, cfg: RunConfig = None, truth_path=None,
               coeffs_path=None, undamaged_path=None, damaged_path=None, png=True) -> int:
    """Plot-ready CSVs (and PNGs) for the coefficient histogram, energy-sum
    histograms before/after calibration, truth-vs-predicted pairs and the
    per-epoch MAE curve. Inputs that are not given skip their figures."""
    cfg = cfg or RunConfig()
    rep = fileio.read_report(report_path)
    n_bins = cfg.metrics.n_bins
    out = Path(figures_dir)
    out.mkdir(parents=True, exist_ok=True)

    epochs = rep["epochs"]
    fileio.write_rows(out / "training_curve.csv",
                      ["epoch", "critic_loss", "generator_loss", "wasserstein_estimate",
                       "mae", "r2"],
                      [[r["epoch"], r["critic_loss"], r["generator_loss"],
                        r["wasserstein_estimate"], r.get("mae_vs_truth"), r.get("r2_vs_truth")]
                       for r in epochs])
    maes = [r.get("mae_vs_truth") for r in epochs]
    if png and all(m is not None for m in maes):
        plotting.mae_curve(out / "mae_curve.png", [r["epoch"] for r in epochs], maes)

    truth = fileio.read_coefficients(truth_path) if truth_path else None
    coeffs = fileio.read_coefficients(coeffs_path) if coeffs_path else None
    if truth is not None:
        h = histogram(truth, n_bins, *auto_range(truth))
        fileio.write_histogram(out / "true_coefficients_hist.csv", h)
        if png:
            plotting.coefficient_histogram(out / "true_coefficients_hist.png", h)
    if truth is not None and coeffs is not None:
        if truth.shape != coeffs.shape:
            raise FormatError("truth and predicted coefficient grids differ")
        mask = np.asarray(rep["config"]["mask"]) if rep["config"] else np.arange(truth.size)
        t, p = truth.ravel()[mask], coeffs.ravel()[mask]
        n_cols = truth.shape[1]
        fileio.write_rows(out / "truth_vs_predicted.csv", ["row", "col", "true_a", "pred_a"],
                          [[int(i) // n_cols, int(i) % n_cols, float(a), float(b)]
                           for i, a, b in zip(mask, t, p)])
        if png:
            plotting.truth_vs_predicted(out / "truth_vs_predicted.png", t, p)
    if undamaged_path and damaged_path:
        und = _read(undamaged_path, cfg)
        dam = _read(damaged_path, cfg)
        sums = {"undamaged": energy_sum(und), "damaged": energy_sum(dam)}
        if coeffs is not None:
            sums["calibrated"] = energy_sum(calibrate(dam, coeffs))
        lo, hi = auto_range(*sums.values())
        hists = {k: histogram(v, n_bins, lo, hi) for k, v in sums.items()}
        for k, h in hists.items():
            fileio.write_histogram(out / f"energy_sum_{k}.csv", h)
        if png:
            plotting.energy_sums(out / "energy_sum_before.png",
                                 {k: hists[k] for k in ("undamaged", "damaged")},
                                 "before calibration")
            if "calibrated" in hists:
                plotting.energy_sums(out / "energy_sum_after.png",
                                     {k: hists[k] for k in ("undamaged", "calibrated")},
                                     "after calibration")
    log.info("report written to %s", out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="calocal", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--config", help="INI run configuration (defaults if omitted)")
        if seed:
            sp.add_argument("--seed", type=int, help="override the configured seeds")

    sp = sub.add_parser("simulate", help="generate an undamaged event file")
    common(sp)
    sp.add_argument("--out", required=True)
    sp.add_argument("--csv", help="also export events as CSV")

    sp = sub.add_parser("damage", help="apply dose-linear aging")
    common(sp)
    sp.add_argument("--in", dest="in_path", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--profile-out", required=True, help="true coefficient CSV")

    sp = sub.add_parser("calibrate", help="learn aging coefficients adversarially")
    common(sp)
    sp.add_argument("--undamaged", required=True)
    sp.add_argument("--damaged", required=True)
    sp.add_argument("--out", required=True, help="predicted coefficient CSV")
    sp.add_argument("--report-out", required=True, help="JSON-lines training report")
    sp.add_argument("--truth", help="true coefficient CSV for per-epoch MAE")

    sp = sub.add_parser("evaluate", help="score a calibration")
    common(sp, seed=False)
    sp.add_argument("--damaged", required=True)
    sp.add_argument("--undamaged", required=True)
    sp.add_argument("--coeffs", required=True)
    sp.add_argument("--truth")
    sp.add_argument("--out", required=True, help="metrics JSON")

    sp = sub.add_parser("report", help="emit figure data and plots")
    common(sp, seed=False)
    sp.add_argument("--report", required=True, help="JSON-lines training report")
    sp.add_argument("--out", "--figures-dir", dest="out", required=True)
    sp.add_argument("--truth")
    sp.add_argument("--coeffs")
    sp.add_argument("--undamaged")
    sp.add_argument("--damaged")
    sp.add_argument("--no-png", action="store_true", help="CSV data only")
    return p


def _dispatch(args) -> int:
    cfg = _resolve(args)
    if args.command == "simulate":
        return cmd_simulate(cfg, args.out, args.csv)
    if args.command == "damage":
        return cmd_damage(cfg, args.in_path, args.out, args.profile_out)
    if args.command == "calibrate":
        return cmd_calibrate(cfg, args.undamaged, args.damaged, args.out, args.report_out,
                             args.truth)
    if args.command == "evaluate":
        return cmd_evaluate(cfg, args.damaged, args.undamaged, args.coeffs, args.out, args.truth)
    return cmd_report(args.report, args.out, cfg, args.truth, args.coeffs, args.undamaged,
                      args.damaged, png=not args.no_png)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if not logging.getLogger().handlers:
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="calocal: %(message)s", stream=sys.stderr)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"calocal: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingError as exc:
        print(f"calocal: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (FormatError, OSError, ValueError) as exc:
        print(f"calocal: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
