import subprocess
import sys

import numpy as np
import pytest
import yaml

from scenarios import small_chain
from chainscale.cli import main
from chainscale.forecast import load_model
from chainscale.scenario import dump_config, load_scenario

VERBS = [
    ["run"],
    ["run", "--controller", "stpid"],
    ["sweep", "--axis", "hpa.target_util", "--values", "0.25,0.5"],
    ["ladder"],
]


@pytest.fixture
def scenario(tmp_path):
    path = tmp_path / "small.yaml"
    path.write_text(dump_config(small_chain()))
    return path


def outputs(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


@pytest.mark.parametrize("verb", VERBS, ids=lambda v: " ".join(v))
def test_reruns_are_bitwise_identical(verb, scenario, tmp_path):
    runs = []
    for k in range(2):
        out = tmp_path / f"out{k}"
        assert main(verb + ["--scenario", str(scenario), "--seed", "11", "--out", str(out)]) == 0
        runs.append(outputs(out))
    assert runs[0] == runs[1]
    assert "summary.csv" in runs[0]
    assert any(name.startswith("timeseries_") for name in runs[0])


def test_seed_changes_noisy_trace(scenario, tmp_path):
    for seed in ("1", "2"):
        main(["run", "--scenario", str(scenario), "--seed", seed, "--out", str(tmp_path / seed)])
    assert (tmp_path / "1" / "summary.csv").read_bytes() != (tmp_path / "2" / "summary.csv").read_bytes()


def test_run_outputs(scenario, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", "--scenario", str(scenario), "--out", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["config_echo.yaml", "summary.csv", "timeseries_pid.csv"]
    summary = (out / "summary.csv").read_text()
    assert summary.splitlines()[0] == "controller,core_min,violation_ms,p50_ms,p95_ms,max_ms"
    assert capsys.readouterr().out == summary
    echo = yaml.safe_load((out / "config_echo.yaml").read_text())
    assert echo == {k: v for k, v in load_scenario(scenario).items() if k != "base_dir"}


def test_config_echo_reproduces_run(scenario, tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    main(["ladder", "--scenario", str(scenario), "--out", str(first)])
    main(["ladder", "--scenario", str(first / "config_echo.yaml"), "--out", str(second)])
    assert outputs(first) == outputs(second)


def test_sweep_outputs(scenario, tmp_path):
    out = tmp_path / "out"
    main(["sweep", "--scenario", str(scenario), "--axis", "hpa.target_util",
          "--values", "0.25,0.5", "--out", str(out)])
    names = sorted(p.name for p in out.iterdir())
    assert "timeseries_hpa.target_util=0.25.csv" in names
    rows = (out / "summary.csv").read_text().splitlines()
    assert rows[0].startswith("hpa.target_util,controller")
    assert [r.split(",")[0] for r in rows[1:]] == ["0.25", "0.5"]


def test_ladder_outputs(scenario, tmp_path):
    out = tmp_path / "out"
    main(["ladder", "--scenario", str(scenario), "--out", str(out)])
    rows = (out / "summary.csv").read_text().splitlines()[1:]
    assert [r.split(",")[0] for r in rows] == ["hpa", "pid", "wpid", "spid", "stpid"]


def test_train_predictor(tmp_path):
    raw = small_chain(duration=3600)
    raw["predictor"] = {"kind": "lstm", "interval_sec": 60, "window": 4, "hidden": 3, "epochs": 20}
    path = tmp_path / "s.yaml"
    path.write_text(dump_config(raw))
    out = tmp_path / "model"
    assert main(["train-predictor", "--scenario", str(path), "--out", str(out)]) == 0
    model = load_model(out / "model_x.npz")
    assert (model.kind, model.window, model.hidden) == ("lstm", 4, 3)
    again = tmp_path / "again"
    main(["train-predictor", "--scenario", str(path), "--out", str(again)])
    assert outputs(out) == outputs(again)

    raw["predictor"]["model"] = str(out / "model_x.npz")
    path.write_text(dump_config(raw))
    assert main(["run", "--controller", "stpid", "--scenario", str(path), "--out", str(tmp_path / "r")]) == 0
    assert np.isfinite(float((tmp_path / "r" / "summary.csv").read_text().splitlines()[1].split(",")[2]))


def test_validate_config(scenario, capsys):
    assert main(["validate-config", "--scenario", str(scenario)]) == 0
    assert capsys.readouterr().out.startswith("ok: 2 microservices, 1 endpoints")


def test_invalid_config_exits_nonzero_and_leaves_nothing(tmp_path, capsys):
    raw = small_chain()
    raw["pid"]["kp"] = -1
    path = tmp_path / "bad.yaml"
    path.write_text(dump_config(raw))
    out = tmp_path / "results" / "out"
    assert main(["ladder", "--scenario", str(path), "--out", str(out)]) == 2
    assert "pid" in capsys.readouterr().err
    results = tmp_path / "results"
    assert not results.exists() or list(results.iterdir()) == []
    assert main(["validate-config", "--scenario", str(path)]) == 2


def test_failure_mid_write_leaves_nothing(scenario, tmp_path):
    out = tmp_path / "out"
    code = main(["sweep", "--scenario", str(scenario), "--axis", "hpa.target_util",
                 "--values", "0.25,2.0", "--out", str(out)])
    assert code == 2
    assert list(tmp_path.iterdir()) == [scenario]


def test_missing_scenario_and_bad_values(tmp_path):
    assert main(["run", "--scenario", str(tmp_path / "nope.yaml"), "--out", str(tmp_path / "o")]) == 2
    assert main(["sweep", "--axis", "hpa.target_util", "--values", "x", "--out", str(tmp_path / "o")]) == 2
    assert not (tmp_path / "o").exists()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "chainscale", "validate-config"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("ok: 3 microservices")
    bad = subprocess.run([sys.executable, "-m", "chainscale", "frobnicate"], capture_output=True)
    assert bad.returncode != 0
