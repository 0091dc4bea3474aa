"""Config parsing, preset construction, CLI subcommands, and artifacts."""

import subprocess
import sys

import numpy as np
import pytest

from lowmach.cli import main
from lowmach.config import (
    RunConfig,
    build_initial_spec,
    config_lines,
    parse_config_text,
)
from lowmach.errors import ConfigError
from lowmach.reports import read_csv
from lowmach.snapshots import load_field, read_sidecar


SMALL = """
# comment lines and blanks are ignored
dimension = 1
resolution = 64
eps_list = 0.2, 0.1
t_final = 0.05
preset = single-mode
seed = 3
"""


def write_cfg(tmp_path, text=SMALL, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


# ---------------------------------------------------------------- parsing

def test_parse_config_defaults_and_overrides():
    cfg = parse_config_text(SMALL)
    assert cfg.dimension == 1
    assert cfg.resolution == 64
    assert cfg.eps_list == (0.2, 0.1)
    assert cfg.t_final == 0.05
    assert cfg.gamma == 2.0          # default preserved
    assert cfg.psi_normalization == "normalized"
    assert cfg.seed == 3


def test_parse_config_rejects_unknown_and_malformed():
    with pytest.raises(ConfigError):
        parse_config_text("no_such_key = 3")
    with pytest.raises(ConfigError):
        parse_config_text("just a line without equals")
    with pytest.raises(ConfigError):
        parse_config_text("resolution = sixty")
    with pytest.raises(ConfigError):
        parse_config_text("dealias = maybe")


def test_validation_errors():
    with pytest.raises(ConfigError):
        RunConfig(dimension=7)
    with pytest.raises(ConfigError):
        RunConfig(resolution=9)                 # odd
    with pytest.raises(ConfigError):
        RunConfig(resolution=4)                 # too coarse
    with pytest.raises(ConfigError):
        RunConfig(eps_list=(0.1, 0.2))          # not decreasing
    with pytest.raises(ConfigError):
        RunConfig(eps_list=(1.5,))
    with pytest.raises(ConfigError):
        RunConfig(gamma=1.0)
    with pytest.raises(ConfigError):
        RunConfig(psi_normalization="other")
    with pytest.raises(ConfigError):
        RunConfig(preset="no-such-preset")
    with pytest.raises(ConfigError):
        RunConfig(preset="coefficients")        # empty coefficient table


def test_config_lines_round_trip():
    cfg = parse_config_text(SMALL)
    again = parse_config_text("\n".join(config_lines(cfg)))
    assert again == cfg


def test_coefficient_config_round_trip():
    text = """
dimension = 1
resolution = 64
eps_list = 0.2
preset = coefficients
sigma0_coeff.1 = 0.05, 0.01
potential_coeff.2 = 0.25
mean_velocity = 2.0
preparation = ill
"""
    cfg = parse_config_text(text)
    assert cfg.preset == "coefficients"
    assert cfg.coefficients["sigma0"][1] == 0.05 + 0.01j
    assert cfg.coefficients["potential"][2] == 0.25 + 0.0j
    again = parse_config_text("\n".join(config_lines(cfg)))
    assert again == cfg


def test_coefficient_mode_outside_band_rejected():
    text = """
dimension = 1
resolution = 64
eps_list = 0.2
preset = coefficients
potential_coeff.60 = 0.1
"""
    cfg = parse_config_text(text)
    with pytest.raises(ConfigError):
        build_initial_spec(cfg, 0.2)


# ---------------------------------------------------------------- presets

def test_every_preset_materializes():
    for preset in ("single-mode", "two-mode-resonant", "random-Hs",
                   "random-Hs(3.0, 11)", "well-prepared-shear"):
        for dim, res in ((1, 64), (2, 32)):
            cfg = RunConfig(dimension=dim, resolution=res, eps_list=(0.2,),
                            t_final=0.1, preset=preset)
            spec = build_initial_spec(cfg, 0.2)
            assert spec.eps == 0.2
            assert spec.vtilde0.values.shape[0] == dim
    shear = build_initial_spec(
        RunConfig(dimension=1, resolution=64, eps_list=(0.2,),
                  preset="well-prepared-shear"), 0.2)
    assert shear.preparation == "well"
    assert shear.second_order_density is not None


def test_random_hs_preset_is_seed_reproducible():
    a = build_initial_spec(RunConfig(dimension=1, resolution=64,
                                     eps_list=(0.2,), preset="random-Hs",
                                     seed=5), 0.2)
    b = build_initial_spec(RunConfig(dimension=1, resolution=64,
                                     eps_list=(0.2,), preset="random-Hs",
                                     seed=5), 0.2)
    c = build_initial_spec(RunConfig(dimension=1, resolution=64,
                                     eps_list=(0.2,), preset="random-Hs",
                                     seed=6), 0.2)
    assert np.array_equal(a.vtilde0.values, b.vtilde0.values)
    assert not np.array_equal(a.vtilde0.values, c.vtilde0.values)


# -------------------------------------------------------------- CLI basics

def test_cli_usage_errors_exit_one(tmp_path, capsys):
    assert main(["no-such-command"]) == 1
    assert main(["entropy", "--no-such-flag"]) == 1
    capsys.readouterr()


def test_cli_missing_and_invalid_config_exit_two(tmp_path, capsys):
    missing = tmp_path / "absent.cfg"
    assert main(["entropy", "--config", str(missing),
                 "--out", str(tmp_path / "o")]) == 2
    bad = write_cfg(tmp_path, "dimension = 7\n", name="bad.cfg")
    assert main(["entropy", "--config", str(bad),
                 "--out", str(tmp_path / "o2")]) == 2
    capsys.readouterr()


def test_cli_entropy_artifacts(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "out"
    assert main(["entropy", "--config", str(cfg), "--out", str(out),
                 "--eps", "0.2"]) == 0
    capsys.readouterr()
    header, data = read_csv(out / "trace.csv")
    assert header[:7] == ["t", "E", "H", "comp_velocity", "comp_pressure",
                          "comp_quantum", "strong_gap"]
    assert header[7:] == [f"weak_gap_{i}" for i in range(1, 6)]
    assert data[0, 0] == 0.0 and data[-1, 0] == pytest.approx(0.05, abs=1e-12)
    # energy bound held on every output row
    assert np.all(data[:, 1] <= data[0, 1] * (1.0 + 1e-6) + 1e-30)
    assert (out / "entropy_components.svg").is_file()
    echoed = (out / "config.txt").read_text()
    assert "preset=single-mode" in echoed
    assert "eps_list=0.2" in echoed.replace(" ", "")


def test_cli_sweep_artifacts(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "sweep"
    assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == 0
    capsys.readouterr()
    header, data = read_csv(out / "report.csv")
    assert header == ["eps", "sup_H", "sup_H_minus_floor", "sup_strong_gap",
                      "fitted_rate", "C_fit", "M_fit"]
    assert list(data[:, 0]) == [0.2, 0.1]
    gh, gd = read_csv(out / "gronwall.csv")
    assert gh == ["eps", "C_fit", "M_fit", "r_fit"]
    assert np.all(gd[:, 1] == 1.0)
    wh, wd = read_csv(out / "weak_gaps.csv")
    assert wh == ["eps"] + [f"shell_{i}" for i in range(5)]
    assert wd.shape == (2, 6)
    assert (out / "sweep_decay.svg").is_file()
    for eps in ("0.2", "0.1"):
        sub = out / f"eps_{eps}"
        h2, d2 = read_csv(sub / "trace.csv")
        assert h2[:3] == ["t", "E", "H"]


def test_cli_run_qhd_artifacts(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "qhd"
    assert main(["run-qhd", "--config", str(cfg), "--out", str(out),
                 "--eps", "0.2"]) == 0
    capsys.readouterr()
    header, data = read_csv(out / "qhd_trace.csv")
    assert header == ["t", "mass", "hamiltonian", "E"]
    assert np.max(np.abs(data[:, 1] / data[0, 1] - 1.0)) < 1e-12
    snap = load_field(out / "qhd_final.qhdf")
    assert snap.is_complex
    meta = read_sidecar(out / "qhd_final.qhdf")
    assert meta["eps"] == 0.2
    assert meta["t"] == pytest.approx(0.05, abs=1e-12)
    assert meta["gamma"] == 2.0


def test_cli_run_euler_artifacts(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "euler"
    assert main(["run-euler", "--config", str(cfg), "--out", str(out)]) == 0
    capsys.readouterr()
    header, data = read_csv(out / "euler_trace.csv")
    assert header == ["t", "kinetic_energy", "divergence_defect"]
    assert np.all(data[:, 2] < 1e-8)
    assert (out / "euler_final.qhdf").is_file()


def test_cli_run_limit_artifacts(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "limit"
    assert main(["run-limit", "--config", str(cfg), "--out", str(out),
                 "--eps", "0.2"]) == 0
    capsys.readouterr()
    header, data = read_csv(out / "limit_trace.csv")
    assert header == ["t", "profile_norm"]
    # the averaged system conserves the profile norm
    assert np.max(np.abs(data[:, 1] / data[0, 1] - 1.0)) < 1e-8
    th, td = read_csv(out / "resonant_triples.csv")
    assert th == ["k_x", "m_x", "l_x", "sigma_m", "sigma_l", "sigma_k"]


def test_cli_filter_artifacts(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "filt"
    assert main(["filter", "--config", str(cfg), "--out", str(out),
                 "--eps", "0.2"]) == 0
    capsys.readouterr()
    header, data = read_csv(out / "filter_trace.csv")
    assert header == ["t", "raw_norm", "filtered_norm", "filtered_drift"]
    # filtering must not inflate the pair norm
    assert np.all(data[:, 2] <= data[:, 1] * (1.0 + 1e-9))


def test_cli_plot_dispatch(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    run_out = tmp_path / "run"
    assert main(["entropy", "--config", str(cfg), "--out", str(run_out),
                 "--eps", "0.2"]) == 0
    plot_out = tmp_path / "plots"
    assert main(["plot", str(run_out / "trace.csv"),
                 "--out", str(plot_out)]) == 0
    capsys.readouterr()
    assert (plot_out / "entropy_components.svg").is_file()


def test_cli_plot_rejects_empty_csv(tmp_path, capsys):
    bad = tmp_path / "empty.csv"
    bad.write_text("t,E,H\n")
    out = tmp_path / "plots"
    assert main(["plot", str(bad), "--out", str(out)]) == 2
    capsys.readouterr()
    assert not (out / "entropy_components.svg").exists()


def test_cli_check_passes_on_small_config(tmp_path):
    cfg = write_cfg(tmp_path)
    proc = subprocess.run(
        [sys.executable, "-m", "lowmach", "check", "--config", str(cfg)],
        capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0
    lines = [ln for ln in proc.stdout.strip().split("\n") if ln]
    assert len(lines) == 10
    assert all(ln.startswith("PASS") for ln in lines)


def test_cli_determinism_across_out_dirs(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    a = tmp_path / "a"
    b = tmp_path / "b"
    for out in (a, b):
        assert main(["entropy", "--config", str(cfg), "--out", str(out),
                     "--eps", "0.2"]) == 0
    capsys.readouterr()
    assert (a / "trace.csv").read_bytes() == (b / "trace.csv").read_bytes()
    assert (a / "entropy_components.svg").read_bytes() == \
        (b / "entropy_components.svg").read_bytes()
    # archived configs differ only in the out_dir line
    da = [ln for ln in (a / "config.txt").read_text().splitlines()
          if not ln.startswith("out_dir=")]
    db = [ln for ln in (b / "config.txt").read_text().splitlines()
          if not ln.startswith("out_dir=")]
    assert da == db


def test_entry_point_help_exits_zero():
    proc = subprocess.run([sys.executable, "-m", "lowmach", "--help"],
                          capture_output=True, text=True, timeout=60)
    assert proc.returncode == 0
    for sub in ("run-qhd", "run-euler", "run-limit", "filter", "entropy",
                "sweep", "check", "plot"):
        assert sub in proc.stdout
