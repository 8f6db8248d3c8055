import json

import numpy as np
import pytest

from calocal import fileio
from calocal.aging import apply_damage, independent_seed, make_linear_profile
from calocal.cli import main
from calocal.config import load_config
from calocal.showersim import EventSet, integrated_dose, simulate_events
from calocal.wgan import train_calibration

SMALL_INI = """
[detector]
n_rows = 10
n_cols = 10
[shower]
n_events = 300
[train]
epochs = 2
critic_hidden = 16, 8
mask_half_width = 3
"""


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "small.ini"
    p.write_text(SMALL_INI)
    return p


def pipeline(d, cfg_path, seed=7):
    d.mkdir(exist_ok=True)
    c = ["--config", str(cfg_path)]
    assert main(["simulate", *c, "--seed", str(seed), "--out", str(d / "u.calo")]) == 0
    assert main(["damage", *c, "--in", str(d / "u.calo"), "--out", str(d / "d.calo"),
                 "--profile-out", str(d / "truth.csv")]) == 0
    assert main(["calibrate", *c, "--seed", str(seed), "--undamaged", str(d / "u.calo"),
                 "--damaged", str(d / "d.calo"), "--truth", str(d / "truth.csv"),
                 "--out", str(d / "coeffs.csv"), "--report-out", str(d / "report.jsonl")]) == 0
    assert main(["evaluate", *c, "--damaged", str(d / "d.calo"), "--undamaged", str(d / "u.calo"),
                 "--coeffs", str(d / "coeffs.csv"), "--truth", str(d / "truth.csv"),
                 "--out", str(d / "metrics.json")]) == 0
    return d


def test_pipeline_outputs(tmp_path, cfg_path):
    d = pipeline(tmp_path / "run", cfg_path)
    metrics = json.loads((d / "metrics.json").read_text())
    assert {"mae", "r2", "w1_before", "w1_after"} <= set(metrics)
    assert metrics["config"]["train"]["epochs"] == 2
    rep = fileio.read_report(d / "report.jsonl")
    assert len(rep["epochs"]) == 2
    assert rep["config"]["config"]["train"]["seed"] == 7
    assert fileio.read_coefficients(d / "coeffs.csv").shape == (10, 10)


def test_pipeline_is_byte_deterministic(tmp_path, cfg_path):
    a = pipeline(tmp_path / "a", cfg_path)
    b = pipeline(tmp_path / "b", cfg_path)
    for name in ("u.calo", "d.calo", "truth.csv", "coeffs.csv", "report.jsonl", "metrics.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_pipeline_matches_in_memory_run(tmp_path, cfg_path):
    d = pipeline(tmp_path / "run", cfg_path)
    cfg = load_config(cfg_path).with_seed(7)
    u = simulate_events(cfg.detector, cfg.shower, cfg.sim.n_events, cfg.sim.beam_energy, 7)
    u = u.replace(u.events.astype(np.float32))
    profile = make_linear_profile(integrated_dose(u), cfg.aging.k, cfg.aging.a_min)
    src = simulate_events(cfg.detector, cfg.shower, u.n_events, u.beam_energy, independent_seed(7))
    dam = apply_damage(src, profile)
    dam = dam.replace(dam.events.astype(np.float32))
    coeffs, _ = train_calibration(u, dam, cfg.train, profile)
    np.testing.assert_allclose(fileio.read_coefficients(d / "coeffs.csv"), coeffs, rtol=1e-8)
    np.testing.assert_allclose(fileio.read_coefficients(d / "truth.csv"), profile.a, rtol=1e-8)


def test_shared_showers_option(tmp_path, cfg_path):
    cfg_path.write_text(SMALL_INI + "[aging]\nshared_showers = true\n")
    c = ["--config", str(cfg_path)]
    main(["simulate", *c, "--out", str(tmp_path / "u.calo")])
    main(["damage", *c, "--in", str(tmp_path / "u.calo"), "--out", str(tmp_path / "d.calo"),
          "--profile-out", str(tmp_path / "t.csv")])
    u = fileio.read_events(tmp_path / "u.calo").events
    d = fileio.read_events(tmp_path / "d.calo").events
    a = fileio.read_coefficients(tmp_path / "t.csv")
    np.testing.assert_allclose(d, u * a, rtol=1e-6)


def test_report_emits_csv_and_png(tmp_path, cfg_path):
    d = pipeline(tmp_path / "run", cfg_path)
    figs = tmp_path / "figs"
    assert main(["report", "--config", str(cfg_path), "--report", str(d / "report.jsonl"),
                 "--figures-dir", str(figs), "--truth", str(d / "truth.csv"),
                 "--coeffs", str(d / "coeffs.csv"), "--undamaged", str(d / "u.calo"),
                 "--damaged", str(d / "d.calo")]) == 0
    names = {p.name for p in figs.iterdir()}
    assert {"training_curve.csv", "true_coefficients_hist.csv", "truth_vs_predicted.csv",
            "energy_sum_undamaged.csv", "energy_sum_damaged.csv", "energy_sum_calibrated.csv",
            "mae_curve.png", "energy_sum_before.png", "energy_sum_after.png",
            "truth_vs_predicted.png", "true_coefficients_hist.png"} <= names
    lines = (figs / "energy_sum_damaged.csv").read_text().splitlines()
    assert lines[0] == "bin_lo,bin_hi,count" and lines[-1].startswith("# underflow=")
    assert len(lines) == 62
    assert len((figs / "truth_vs_predicted.csv").read_text().splitlines()) == 37


def test_report_csv_only(tmp_path, cfg_path):
    d = pipeline(tmp_path / "run", cfg_path)
    figs = tmp_path / "figs"
    assert main(["report", "--report", str(d / "report.jsonl"), "--out", str(figs),
                 "--no-png"]) == 0
    assert {p.suffix for p in figs.iterdir()} == {".csv"}


def test_missing_input_exit_3_without_outputs(tmp_path, cfg_path, capsys):
    out = tmp_path / "out"
    rc = main(["calibrate", "--config", str(cfg_path), "--undamaged", str(tmp_path / "nope.calo"),
               "--damaged", str(tmp_path / "nope2.calo"), "--out", str(out / "c.csv"),
               "--report-out", str(out / "r.jsonl")])
    assert rc == 3
    assert not out.exists() or list(out.iterdir()) == []
    assert "nope.calo" in capsys.readouterr().err


def test_bad_file_exit_3(tmp_path, cfg_path):
    bad = tmp_path / "bad.calo"
    bad.write_bytes(b"XYZW" + bytes(40))
    rc = main(["damage", "--config", str(cfg_path), "--in", str(bad), "--out",
               str(tmp_path / "d.calo"), "--profile-out", str(tmp_path / "t.csv")])
    assert rc == 3
    assert not (tmp_path / "d.calo").exists() and not (tmp_path / "t.csv").exists()


def test_config_errors_exit_2(tmp_path, cfg_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[train]\nbogus = 1\n")
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "u.calo")]) == 2
    assert main(["simulate", "--config", str(tmp_path / "none.ini"),
                 "--out", str(tmp_path / "u.calo")]) == 2
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2


def test_divergence_exit_4(tmp_path, cfg_path):
    c = ["--config", str(cfg_path)]
    main(["simulate", *c, "--out", str(tmp_path / "u.calo")])
    wild = tmp_path / "wild.ini"
    wild.write_text(SMALL_INI + "lr_generator = 1e6\nlr_critic = 1e6\nclip = 1e300\n")
    with np.errstate(all="ignore"):
        rc = main(["calibrate", "--config", str(wild), "--undamaged", str(tmp_path / "u.calo"),
                   "--damaged", str(tmp_path / "u.calo"), "--out", str(tmp_path / "c.csv"),
                   "--report-out", str(tmp_path / "r.jsonl")])
    assert rc == 4
    assert not (tmp_path / "c.csv").exists()


def test_threads_env_does_not_change_output(tmp_path, cfg_path, monkeypatch):
    c = ["--config", str(cfg_path)]
    main(["simulate", *c, "--out", str(tmp_path / "one.calo")])
    monkeypatch.setenv("CALOCAL_THREADS", "3")
    main(["simulate", *c, "--out", str(tmp_path / "three.calo")])
    assert (tmp_path / "one.calo").read_bytes() == (tmp_path / "three.calo").read_bytes()


def test_csv_export(tmp_path, cfg_path):
    main(["simulate", "--config", str(cfg_path), "--out", str(tmp_path / "u.calo"),
          "--csv", str(tmp_path / "u.csv")])
    lines = (tmp_path / "u.csv").read_text().splitlines()
    assert len(lines) == 301 and lines[0].startswith("event,r0c0,r0c1")
