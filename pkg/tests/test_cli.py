import json
import subprocess
import sys

import pytest

from chemlab.cli import main
from chemlab.config import build_problem, load_config
from chemlab.diagnostics import energy

RUN = """
[model]
n = 4
R = 1.0
alpha = 0.5
beta = 0.6
[grid]
cells = 48
[time]
t_end = 0.02
[init]
m = 1.0
[output]
dir = "{out}"
"""


@pytest.fixture
def run_cfg(write_toml, tmp_path):
    return write_toml(RUN.format(out=tmp_path / "runs"))


def _json_out(capsys):
    return json.loads(capsys.readouterr().out.strip().splitlines()[-1])


def test_simulate(run_cfg, capsys):
    assert main(["simulate", str(run_cfg)]) == 0
    out = _json_out(capsys)
    assert out["outcome"] == "completed"
    assert (run_cfg.parent / "runs" / out["run_id"] / "timeseries.csv").exists()


def test_simulate_twice_is_byte_identical(run_cfg, tmp_path, capsys):
    main(["simulate", str(run_cfg), "--out", str(tmp_path / "a")])
    rid = _json_out(capsys)["run_id"]
    main(["simulate", str(run_cfg), "--out", str(tmp_path / "b")])
    for name in ("timeseries.csv", "F_vs_t.svg", "supu_vs_t.svg"):
        assert (tmp_path / "a" / rid / name).read_bytes() == (tmp_path / "b" / rid / name).read_bytes()


def test_validation_error_exit_code(write_toml, tmp_path, capsys):
    bad = write_toml(RUN.format(out=tmp_path).replace("cells = 48", "cells = 2"), "bad.toml")
    assert main(["simulate", str(bad)]) == 2
    assert "grid.cells" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [["simulate", "/nonexistent.toml"], ["frobnicate"], ["verify", "--check=magic"], []])
def test_bad_invocations_exit_2(argv):
    assert main(argv) == 2


def test_energy_only(run_cfg, capsys):
    assert main(["energy", str(run_cfg)]) == 0
    out = _json_out(capsys)
    prob = build_problem(load_config(run_cfg))
    assert out["F0"] == energy(prob.state0, prob.kin)
    parts = out["int_G"] - out["int_uv"] + out["half_int_vt2"] + out["half_int_helm2"]
    assert parts == pytest.approx(out["F0"], rel=1e-12)
    assert not (run_cfg.parent / "runs").exists()


def test_initdata(run_cfg, tmp_path, capsys):
    assert main(["initdata", str(run_cfg), "--out", str(tmp_path / "init")]) == 0
    out = _json_out(capsys)
    d = tmp_path / "init" / out["run_id"]
    for name in ("u0", "v0", "w0"):
        lines = (d / f"{name}.csv").read_text().splitlines()
        assert lines[0] == f"r,{name}" and len(lines) == 49
    manifest = json.loads((d / "manifest.json").read_text())
    assert manifest["F0"] == out["F0"] and manifest["mass"] == pytest.approx(1.0)


STAT = """
[model]
n = 2
R = 5.0
alpha = 0.0
beta = 1.0
[grid]
cells = 64
[init]
m = 392.69908169872417
[stationary]
closure = "flux"
guess = "bump"
tol = {tol}
"""


def test_stationary(write_toml, tmp_path, capsys):
    cfg = write_toml(STAT.format(tol="1e-10"))
    assert main(["stationary", str(cfg), "--out", str(tmp_path / "st")]) == 0
    out = _json_out(capsys)
    assert out["converged"] is True
    assert {"m", "L", "F", "residuals", "iterations", "converged"} <= set(out)
    d = tmp_path / "st" / out["run_id"]
    assert (d / "stationary_profiles.csv").read_text().startswith("r,u,v,w\n")
    assert json.loads((d / "stationary.json").read_text())["F"] == out["F"]


def test_stationary_not_converged_is_runtime_failure(write_toml, tmp_path, monkeypatch):
    import chemlab.stationary as stationary

    real = stationary.solve_stationary
    monkeypatch.setattr(stationary, "solve_stationary",
                        lambda *a, **k: real(*a, **(k | {"max_iter": 2, "newton": False})))
    cfg = write_toml(STAT.format(tol="1e-10"))
    assert main(["stationary", str(cfg), "--out", str(tmp_path)]) == 3


def test_stationary_options_validated(write_toml, tmp_path, capsys):
    cfg = write_toml(STAT.format(tol="1e-10").replace('closure = "flux"', 'closure = "magic"'))
    assert main(["stationary", str(cfg), "--out", str(tmp_path)]) == 2
    assert "stationary.closure" in capsys.readouterr().err


def test_runtime_failure_exit_code(monkeypatch, run_cfg):
    import chemlab.sweep

    def boom(*a, **k):
        raise FloatingPointError("synthetic")

    monkeypatch.setattr(chemlab.sweep, "execute", boom)
    assert main(["simulate", str(run_cfg)]) == 3


def test_verify_conditions(capsys):
    assert main(["verify", "--check=conditions"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    recs = [json.loads(x) for x in lines]
    assert len(recs) > 50
    for rec in recs:
        assert {"check", "n", "N", "lhs", "rhs", "rel_residual", "pass"} <= set(rec)
        assert rec["pass"] is True


def test_sweep_cli_with_env_workers(write_toml, tmp_path, monkeypatch, capsys):
    text = RUN.format(out=tmp_path / "sw") + "[sweep]\nalpha = [0.5, 1.2]\n"
    spec = write_toml(text, "sweep.toml")
    monkeypatch.setenv("CHEMLAB_WORKERS", "2")
    assert main(["sweep", str(spec)]) == 0
    captured = capsys.readouterr()
    assert "2 configurations" in captured.err and "2 worker(s)" in captured.err
    assert main(["sweep", str(spec)]) == 0
    assert json.loads(capsys.readouterr().out)["ran"] == 0
    rows = (tmp_path / "sw" / "sweep.csv").read_text().splitlines()
    assert len(rows) == 3


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "chemlab", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("chemlab ")
    proc = subprocess.run([sys.executable, "-m", "chemlab", "energy", "/no/such.toml"], capture_output=True)
    assert proc.returncode == 2
