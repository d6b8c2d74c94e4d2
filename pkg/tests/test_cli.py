import csv
import json

import pytest

from ctxgap import __version__
from ctxgap.cli import main

CONFIG = {
    "env": {"kind": "synthetic_sine", "arms": 3, "offsets": [1.0, 0.5, 0.0], "amplitude": 0.2},
    "policies": ["contextual_gap", "kernel_ucb"],
    "defaults": {"bandwidth": 0.3, "lam": 0.1},
    "budgets": [10, 20],
    "eval_size": 30,
    "replications": 2,
    "timing": False,
}


@pytest.fixture
def config(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(CONFIG))
    return p


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_version(capsys):
    assert main(["--version"]) == 0
    assert __version__ in capsys.readouterr().out


@pytest.mark.parametrize("argv", [[], ["fly"], ["sweep"], ["sweep", "--config", "x", "--bogus"],
                                  ["diagnose", "nope"]])
def test_usage_errors_exit_1(argv, capsys):
    assert main(argv) == 1
    assert "usage" in capsys.readouterr().err


def test_sweep_writes_csvs_and_figures(tmp_path, config, capsys):
    before = config.read_bytes()
    out = tmp_path / "run"
    assert main(["--quiet", "sweep", "--config", str(config), "--output", str(out)]) == 0
    assert capsys.readouterr().out == ""
    assert config.read_bytes() == before
    data = rows(out / "regret.csv")
    assert len(data) == 2 * 2 * 2
    assert {(r["policy"], r["budget"], r["replication"]) for r in data} == {
        (p, b, r) for p in ("contextual_gap", "kernel_ucb") for b in ("10", "20") for r in ("0", "1")
    }
    assert len(rows(out / "regret_hist.csv")) == 8 * 3
    for name in ("regret_avg.png", "regret_worst.png", "regret_hist.png"):
        assert (out / name).read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["max_budget"] == 20 and manifest["failed"] == 0


def test_sweep_replay_bit_exact(tmp_path, config, capsys):
    out = tmp_path / "run"
    assert main(["-q", "sweep", "-c", str(config), "-o", str(out), "--no-plots", "--set", "seed=11"]) == 0
    capsys.readouterr()
    for r in rows(out / "regret.csv"):
        assert main(["replay", "--run", str(out), "--policy", r["policy"], "--budget", r["budget"],
                     "--replication", r["replication"]]) == 0
        got = json.loads(capsys.readouterr().out)
        assert float(got["avg_regret"]) == float(r["avg_regret"])
        assert float(got["worst_regret"]) == float(r["worst_regret"])


def test_sweep_with_tuning(tmp_path, config, capsys):
    out = tmp_path / "tuned"
    args = ["sweep", "-c", str(config), "-o", str(out), "--no-plots",
            "--set", 'tune={"grid": {"bandwidth": [0.3, 1.0]}, "budget": 20}']
    assert main(args) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(manifest["tuning"]) == {"contextual_gap", "kernel_ucb"}
    r = rows(out / "regret.csv")[0]
    capsys.readouterr()
    assert main(["replay", "--run", str(out), "--policy", r["policy"], "--budget", r["budget"],
                 "--replication", r["replication"]]) == 0
    assert float(json.loads(capsys.readouterr().out)["avg_regret"]) == float(r["avg_regret"])


def test_tune_writes_params(tmp_path, config):
    out = tmp_path / "t"
    args = ["-q", "tune", "-c", str(config), "-o", str(out),
            "--set", 'tune={"grid": {"lam": [0.1, 1.0]}, "budget": 20, "eval_size": 10}']
    assert main(args) == 0
    tuned = json.loads((out / "tuned.json").read_text())
    assert tuned["policies"]["kernel_ucb"]["lam"] in (0.1, 1.0)


def test_tune_without_section_is_config_error(tmp_path, config):
    assert main(["tune", "-c", str(config), "-o", str(tmp_path)]) == 1


def test_config_errors_exit_1(tmp_path, config):
    assert main(["sweep", "-c", str(tmp_path / "missing.json")]) == 1
    assert main(["sweep", "-c", str(config), "--set", "budgets=[20, 10]"]) == 1
    assert main(["sweep", "-c", str(config), "--set", "nonsense"]) == 1
    assert main(["replay", "--run", str(tmp_path), "--policy", "uniform", "--budget", "1",
                 "--replication", "0"]) == 1


def test_runtime_failure_exit_2(tmp_path, config):
    # a stored dataset shorter than the budget fails every cell
    data = tmp_path / "tiny.csv"
    assert main(["-q", "gen-data", "--env", "synthetic_sine", "--arms", "3", "-n", "15",
                 "-o", str(data)]) == 0
    args = ["-q", "sweep", "-c", str(config), "-o", str(tmp_path / "o"), "--no-plots",
            "--set", json.dumps({"kind": "csv", "arms": 3, "path": str(data)}).join(["env=", ""])]
    assert main(args) == 2


def test_diagnose_coverage_json(tmp_path):
    out = tmp_path / "diag"
    assert main(["-q", "diagnose", "coverage", "--beta", "2", "--trials", "100", "-o", str(out)]) == 0
    rep = json.loads((out / "coverage.json").read_text())
    assert rep["name"] == "coverage" and rep["trials"] == 100 and rep["seed"] == 0
    assert rep["pass"] is (rep["violation_rate"] <= 0.0283 + 1e-12)
    assert rep["pass"] is True


def test_gen_data_round_trip(tmp_path):
    from ctxgap.environments import load_csv

    p = tmp_path / "d.csv"
    spec = json.dumps({"kind": "ar1_sensor", "arms": 2, "dims": 2, "noise_sigma": 0.1})
    assert main(["-q", "--seed", "4", "gen-data", "--env", spec, "-n", "25", "-o", str(p)]) == 0
    env = load_csv(p, shuffle=False)
    assert env.contexts.shape == (25, 2) and env.true_means.shape == (25, 2)
    assert main(["-q", "gen-data", "--env", "{bad", "-n", "5", "-o", str(p)]) == 1
    assert main(["-q", "gen-data", "--env", "unit_circle", "-n", "5", "--no-means", "-o", str(p)]) == 0
    assert load_csv(p).true_means is None
