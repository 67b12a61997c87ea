"""Tests for config parsing, the CLI subcommands, and artifact determinism."""

import json

import numpy as np
import pytest

from perifront.cli import (CoeffSpec, _parse_coeff, build_problem, main,
                           parse_config)
from perifront.errors import ParseError, ValidationError

MINIMAL = """
schema = 1
problem.T = 1.0
"""


def test_parse_minimal_fills_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.get("problem.T") == 1.0
    assert cfg.get("grid.nxi") == 1024
    assert cfg.get("tol.fixed_point") == 1e-5
    assert cfg.get("task.phi") == "cosine"
    assert cfg.get("task.h0") is None


def test_parse_rejects_negative_period():
    with pytest.raises(ValidationError, match="> 0"):
        parse_config("problem.T = -1")


def test_parse_unknown_key_suggests():
    with pytest.raises(ParseError, match="problem.beta"):
        parse_config("problem.betaa = const 1")


def test_parse_duplicate_key():
    with pytest.raises(ParseError, match="duplicate"):
        parse_config("problem.T = 1\nproblem.T = 2")


def test_parse_bad_line():
    with pytest.raises(ParseError, match="line 1"):
        parse_config("this is not a key value pair")


def test_parse_wrong_schema():
    with pytest.raises(ValidationError):
        parse_config("schema = 7")


def test_coeff_specs():
    assert _parse_coeff("const 2.5") == CoeffSpec("const", (2.5,))
    spec = _parse_coeff("sin-offset mean=1 amp=0.5 harmonic=2 phase=0.1")
    fn = spec.resolve(1.0)
    t = np.linspace(0, 1, 41)
    assert np.abs(fn(t) - (1 + 0.5 * np.sin(4 * np.pi * t + 0.1))).max() < 1e-6
    multi = _parse_coeff("sin-offset mean=0 terms=0.3:1:0,0.1:2:0")
    fn2 = multi.resolve(1.0)
    expect = 0.3 * np.sin(2 * np.pi * t) + 0.1 * np.sin(4 * np.pi * t)
    assert np.abs(fn2(t) - expect).max() < 1e-6


def test_coeff_samples_roundtrip():
    vals = np.linspace(0.5, 1.5, 32)
    spec = _parse_coeff("samples " + ",".join(f"{v}" for v in vals))
    fn = spec.resolve(2.0)
    assert np.abs(fn.samples - vals).max() < 1e-15


def test_coeff_bad_kind():
    with pytest.raises(ParseError, match="unknown coefficient kind"):
        parse_config("problem.beta = sinusoid 1.0")


def test_sweep_keys_parse():
    cfg = parse_config("task = simulate\ntask.h0 = 1\nsweep.task.sigma = 0.5,1,2")
    assert cfg.sweep["task.sigma"] == (0.5, 1.0, 2.0)


def test_sweep_rejects_coefficient_keys():
    with pytest.raises(ValidationError, match="cannot be swept"):
        parse_config("sweep.problem.beta = const 1,const 2")


def test_build_problem_periodic():
    cfg = parse_config("""
problem.T = 1.0
problem.beta = sin-offset mean=1 amp=0.3 harmonic=1
problem.mu = const 1.0
problem.reaction.a = sin-offset mean=1 amp=0.5 harmonic=1
""")
    problem = build_problem(cfg)
    assert problem.beta.mean() == pytest.approx(1.0, abs=1e-9)
    assert problem.reaction.a.mean() == pytest.approx(1.0, abs=1e-9)


def test_cli_validate(tmp_path):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("task = validate\nproblem.beta = const 1\n")
    out = tmp_path / "out"
    code = main(["validate", "--config", str(cfgfile), "--out", str(out)])
    assert code == 0
    rep = json.loads((out / "hypotheses.json").read_text())
    assert rep["all_ok"]
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["completed"] and manifest["task"] == "validate"
    assert (out / "config.echo.txt").exists()
    assert (out / "config.input.txt").read_text() == cfgfile.read_text()


def test_cli_eigen_and_determinism(tmp_path):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("""
task = eigen
task.k = const 0
task.ell = 2.0,3.141592653589793
grid.eigen_nz = 128
grid.eigen_nt = 128
""")
    out1 = tmp_path / "o1"
    out2 = tmp_path / "o2"
    assert main(["eigen", "--config", str(cfgfile), "--out", str(out1)]) == 0
    assert main(["eigen", "--config", str(cfgfile), "--out", str(out2)]) == 0
    b1 = (out1 / "eigen.csv").read_bytes()
    b2 = (out2 / "eigen.csv").read_bytes()
    assert b1 == b2
    rows = np.loadtxt(out1 / "eigen.csv", delimiter=",", skiprows=1)
    assert rows[0, 1] == pytest.approx(np.pi**2 / 4 - 1.0, abs=1e-4)
    assert rows[1, 1] == pytest.approx(0.0, abs=1e-4)


def test_cli_semiwave_artifacts(tmp_path):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("""
task = semiwave
task.kind = halfline
task.k = const 0
grid.nodes_per_unit = 128
grid.steps_per_period = 256
grid.halfline_radius = 16
""")
    out = tmp_path / "out"
    assert main(["semiwave", "--config", str(cfgfile), "--out", str(out)]) == 0
    flux = np.loadtxt(out / "flux.csv", delimiter=",", skiprows=1)
    assert np.abs(flux[:, 1] - 1.0 / np.sqrt(3.0)).max() < 1e-3
    assert (out / "profile.csv").exists()


def test_cli_simulate_artifacts(tmp_path):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("""
task = simulate
task.h0 = 0.5
task.sigma = 0.05
task.horizon_periods = 20
grid.nxi = 256
grid.dtfrac = 256
""")
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(cfgfile), "--out", str(out)]) == 0
    traj = np.loadtxt(out / "trajectory.csv", delimiter=",", skiprows=1)
    assert traj[-1, 5] < 1e-4  # extinction column: supnorm
    snaps = sorted((out / "snapshots").glob("snap_*.csv"))
    assert snaps


def test_cli_task_mismatch(tmp_path):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("task = simulate\ntask.h0 = 1\n")
    assert main(["eigen", "--config", str(cfgfile), "--out",
                 str(tmp_path / "o")]) == 2


def test_cli_missing_required_key(tmp_path):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("task = simulate\n")
    assert main(["simulate", "--config", str(cfgfile), "--out",
                 str(tmp_path / "o")]) == 2


def test_cli_parse_error_exit_code(tmp_path):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("problem.betaa = const 1\n")
    assert main(["validate", "--config", str(cfgfile), "--out",
                 str(tmp_path / "o")]) == 2


def test_cli_sweep(tmp_path):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("""
task = simulate
task.h0 = 0.5
task.horizon_periods = 10
grid.nxi = 256
grid.dtfrac = 256
sweep.task.sigma = 0.02,0.05
""")
    out = tmp_path / "sweep"
    assert main(["sweep", "--config", str(cfgfile), "--out", str(out)]) == 0
    ledger = (out / "sweep_ledger.csv").read_text().strip().splitlines()
    assert len(ledger) == 3  # header + two members
    assert all(",ok," in line for line in ledger[1:])
    for i in range(2):
        assert (out / f"run_{i:04d}" / "trajectory.csv").exists()


def test_cli_env_output_root(tmp_path, monkeypatch):
    monkeypatch.setenv("PERIFRONT_OUT", str(tmp_path / "root"))
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("task = validate\noutput.dir = myrun\n")
    assert main(["validate", "--config", str(cfgfile)]) == 0
    assert (tmp_path / "root" / "myrun" / "hypotheses.json").exists()


def test_cli_classify_vanishing_run(tmp_path):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("""
task = classify
task.h0 = 0.5
task.sigma = 0.05
grid.nodes_per_unit = 128
grid.steps_per_period = 256
grid.halfline_radius = 16
grid.nxi = 512
grid.dtfrac = 512
classify.window = 4
classify.escape_radius = 6
classify.horizon_periods = 40
""")
    out = tmp_path / "out"
    assert main(["classify", "--config", str(cfgfile), "--out", str(out)]) == 0
    rec = json.loads((out / "outcome.json").read_text())
    assert rec["kind"] == "Vanishing"
    assert rec["regime"] == "Small"
    assert (out / "coefficients.csv").exists()


def test_cli_sweep_parallel_workers(tmp_path):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("task = validate\nsweep.problem.T = 0.5,1.0\n")
    out = tmp_path / "sw"
    assert main(["sweep", "--config", str(cfgfile), "--out", str(out),
                 "--workers", "2"]) == 0
    for i in range(2):
        rep = json.loads((out / f"run_{i:04d}" / "hypotheses.json").read_text())
        assert rep["all_ok"]


def test_cli_threshold_contract(tmp_path):
    # coarse bracket on coarse grids: exercises the runner end to end; the
    # tight-tolerance version lives in the acceptance suite
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("""
task = threshold
task.h0 = 0.5
task.bracket_lo = 0.5
task.bracket_hi = 8
task.budget = 6
tol.sigma_rel = 0.5
grid.nodes_per_unit = 128
grid.steps_per_period = 256
grid.halfline_radius = 16
grid.nxi = 512
grid.dtfrac = 512
classify.window = 4
classify.escape_radius = 6
classify.horizon_periods = 40
""")
    out = tmp_path / "out"
    assert main(["threshold", "--config", str(cfgfile), "--out", str(out)]) == 0
    rec = json.loads((out / "threshold.json").read_text())
    assert 0.0 < rec["sigma_low"] < rec["sigma_high"]
    assert rec["bracket_width"] <= 0.5 * rec["sigma_high"] + 1e-12


def test_cli_critical_summary(tmp_path):
    # very coarse grids: exercises the runner; accuracy is acceptance business
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("""
task = critical
problem.beta = const 0.0
grid.nodes_per_unit = 64
grid.steps_per_period = 128
grid.halfline_radius = 12
tol.critical_b = 0.05
tol.fixed_point = 1e-4
""")
    out = tmp_path / "out"
    assert main(["critical", "--config", str(cfgfile), "--out", str(out)]) == 0
    rec = json.loads((out / "critical.json").read_text())
    assert rec["cbar"] == pytest.approx(2.0, abs=1e-9)
    assert rec["regime"] == "Small"
    assert 0.0 < rec["r_mean"] < 2.0
    assert rec["B"] > rec["cbar"]
    assert (out / "r.csv").exists() and (out / "l.csv").exists()


def test_cli_h0_gate_and_force_override(tmp_path):
    # a(t)/b crosses 1, so f is not negative on all of u > 1 and (H0) fails;
    # problem.force downgrades the failure to a warning
    body = """
task = simulate
problem.reaction.a = sin-offset mean=1 amp=0.5 harmonic=1
task.h0 = 0.5
task.sigma = 0.05
task.horizon_periods = 8
grid.nxi = 256
grid.dtfrac = 256
"""
    strict = tmp_path / "strict.cfg"
    strict.write_text(body)
    assert main(["simulate", "--config", str(strict),
                 "--out", str(tmp_path / "o1")]) == 2
    forced = tmp_path / "forced.cfg"
    forced.write_text(body + "problem.force = true\n")
    with pytest.warns(UserWarning, match="running despite"):
        assert main(["simulate", "--config", str(forced),
                     "--out", str(tmp_path / "o2")]) == 0
    assert (tmp_path / "o2" / "trajectory.csv").exists()
