import json

import pytest

from onebit.cli import main
from onebit.quantizer import read_sign_csv

SMALL_SOLVER = {"algorithm": "rka", "max_iters": 200000, "check_every": 500}


def write_config(tmp_path, **cfg):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


def run(args):
    return main([str(a) for a in args])


def test_sweep_writes_csv_and_summary(tmp_path):
    cfg = write_config(tmp_path, model={"kind": "direct", "n": 4}, L_values=[10, 40], trials=3,
                       solver=SMALL_SOLVER, master_seed=5)
    out = tmp_path / "results"
    assert run(["sweep", "--config", cfg, "--out", out, "--quiet"]) == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0].startswith("# onebit master_seed=5 config_sha256=")
    assert lines[1] == "L,N,trial,error,iterations,converged"
    assert len(lines) == 2 + 6
    summary = json.loads((out / "summary.json").read_text())
    assert isinstance(summary["slope"], float)
    assert summary["provenance"]["master_seed"] == 5
    assert (out / "timings.csv").exists()


def test_missing_L_values_is_config_error(tmp_path, capsys):
    cfg = write_config(tmp_path, model={"kind": "direct", "n": 4})
    assert run(["sweep", "--config", cfg, "--out", tmp_path / "o"]) == 1
    assert "L_values" in capsys.readouterr().err


def test_schema_violation_names_field(tmp_path, capsys):
    cfg = write_config(tmp_path, model={"kind": "direct", "n": 4}, L_values=[10, 20],
                       solver={"relaxation": 2.5})
    assert run(["sweep", "--config", cfg, "--out", tmp_path / "o"]) == 1
    assert "solver/relaxation" in capsys.readouterr().err


def test_unsorted_L_values_is_config_error(tmp_path, capsys):
    cfg = write_config(tmp_path, model={"kind": "direct", "n": 4}, L_values=[20, 10])
    assert run(["sweep", "--config", cfg, "--out", tmp_path / "o"]) == 1
    assert "L_values" in capsys.readouterr().err


def test_unreadable_config(tmp_path):
    assert run(["sweep", "--config", tmp_path / "nope.json", "--out", tmp_path / "o"]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["sweep", "--config", bad, "--out", tmp_path / "o"]) == 1


def test_unwritable_output_is_runtime_failure(tmp_path):
    cfg = write_config(tmp_path, model={"kind": "direct", "n": 3}, L=5)
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert run(["simulate", "--config", cfg, "--out", blocker / "sub", "--quiet"]) == 2


def test_sweep_deterministic_and_config_untouched(tmp_path):
    cfg = write_config(tmp_path, model={"kind": "linear", "m": 8, "d": 4}, L_values=[5, 10], trials=3,
                       solver={"algorithm": "skm", "gamma": 8, "max_iters": 20000})
    before = cfg.read_bytes()
    for name in ("a", "b"):
        assert run(["sweep", "--config", cfg, "--out", tmp_path / name, "--seed", 9, "--threads", 2, "--quiet"]) == 0
    assert (tmp_path / "a" / "sweep.csv").read_bytes() == (tmp_path / "b" / "sweep.csv").read_bytes()
    assert (tmp_path / "a" / "summary.json").read_bytes() == (tmp_path / "b" / "summary.json").read_bytes()
    assert cfg.read_bytes() == before


def test_simulate_round_trip(tmp_path):
    cfg = write_config(tmp_path, model={"kind": "linear", "m": 6, "d": 3}, L=4, master_seed=2)
    out = tmp_path / "sim"
    assert run(["simulate", "--config", cfg, "--out", out, "--quiet"]) == 0
    sd = read_sign_csv(out)
    assert sd.signs.shape == (6, 4)
    assert (out / "signs.csv").read_text().startswith("# onebit master_seed=2")
    model = json.loads((out / "model.json").read_text())
    assert model["model"]["variant"] == "linear"


def test_solve_report(tmp_path):
    cfg = write_config(tmp_path, model={"kind": "direct", "n": 5}, L=50, solver=SMALL_SOLVER)
    out = tmp_path / "solve"
    assert run(["solve", "--config", cfg, "--out", out, "--quiet"]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["report"]["converged"] is True
    assert rep["N"] == 250
    assert (out / "history.csv").read_text().splitlines()[1] == "iter,violation,distance"


def test_singularity_and_spread(tmp_path):
    cfg = write_config(tmp_path, model={"kind": "quadratic", "m": 12, "n": 3}, L_values=[4, 8], trials=2,
                       structure={"kind": "rank1sym"},
                       solver={"algorithm": "skm", "gamma": 12, "max_iters": 3000, "check_every": 500})
    assert run(["singularity", "--config", cfg, "--out", tmp_path / "g", "--quiet"]) == 0
    assert (tmp_path / "g" / "singularity.csv").read_text().splitlines()[1].startswith("L,N,trial,error_plain")
    summary = json.loads((tmp_path / "g" / "summary.json").read_text())
    assert len(summary["sign_tests"]) == 1

    cfg = write_config(tmp_path, model={"kind": "direct", "n": 3}, L_values=[10, 100], trials=2, K=3,
                       solver=SMALL_SOLVER)
    assert run(["spread", "--config", cfg, "--out", tmp_path / "s", "--quiet"]) == 0
    lines = (tmp_path / "s" / "spread.csv").read_text().splitlines()
    assert lines[1] == "L,N,trial,spread,excluded" and len(lines) == 6


def test_singularity_requires_structure(tmp_path, capsys):
    cfg = write_config(tmp_path, model={"kind": "quadratic", "m": 12, "n": 3}, L_values=[4, 8])
    assert run(["singularity", "--config", cfg, "--out", tmp_path / "g"]) == 1
    assert "structure" in capsys.readouterr().err


def test_shipped_example_configs_validate():
    from pathlib import Path

    from onebit.cli import load_config

    cfg_dir = Path(__file__).resolve().parents[1] / "configs"
    paths = sorted(cfg_dir.glob("*.json"))
    assert paths
    for path in paths:
        sub = path.stem.split("_")[0]
        load_config(path, sub)
