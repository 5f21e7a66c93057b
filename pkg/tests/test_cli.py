import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from rnnkit.cli import build_parser, main
from rnnkit.model import NeuronRoles, save_model

from conftest import recurrent_pair
from test_harness import toy_dir

GOLDEN = Path(__file__).parent / "golden"
COMMANDS = ["", "solve", "simulate", "train", "eval", "gradcheck", "bench", "fetch-data"]


def help_text(cmd: str) -> str:
    env = {**os.environ, "COLUMNS": "100"}
    argv = [sys.executable, "-m", "rnnkit.cli"] + ([cmd] if cmd else []) + ["--help"]
    return subprocess.run(argv, capture_output=True, text=True, env=env, check=True).stdout


@pytest.mark.parametrize("cmd", COMMANDS)
def test_help_matches_golden(cmd):
    path = GOLDEN / f"help_{cmd or 'main'}.txt"
    if os.environ.get("UPDATE_GOLDEN"):
        path.write_text(help_text(cmd))
    assert help_text(cmd) == path.read_text()


@pytest.mark.parametrize("cmd", COMMANDS[1:])
def test_help_lists_every_flag(cmd):
    parser = build_parser()
    sub = next(a for a in parser._actions if a.dest == "command").choices[cmd]
    text = help_text(cmd)
    for action in sub._actions:
        for flag in action.option_strings:
            assert flag in text


@pytest.fixture
def model_file(tmp_path):
    path = tmp_path / "m.json"
    save_model(path, recurrent_pair(), NeuronRoles((0,), (), (1,)))
    return path


def test_solve_prints_q(model_file, capsys):
    assert main(["solve", "--model", str(model_file)]) == 0
    out = json.loads(capsys.readouterr().out)
    np.testing.assert_allclose(out["q"], [0.6, 0.4], atol=1e-10)


def test_missing_model_is_usage_error(tmp_path, capsys):
    assert main(["solve", "--model", str(tmp_path / "nope.json")]) == 2
    assert "usage" in capsys.readouterr().err


def test_bad_flag_exits_2():
    with pytest.raises(SystemExit) as info:
        main(["solve"])
    assert info.value.code == 2


def test_invalid_model_is_domain_error(tmp_path, capsys):
    doc = recurrent_pair().to_dict()
    doc["r"] = [5.0, 1.0]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    assert main(["solve", "--model", str(path)]) == 1
    assert "invalid model" in capsys.readouterr().err


def test_nonconvergence_is_domain_error(model_file, capsys):
    assert main(["solve", "--model", str(model_file), "--max-iterations", "2"]) == 1


def test_simulate_reports_product_form(model_file, tmp_path):
    out = tmp_path / "sim.json"
    assert main(["simulate", "--model", str(model_file), "--horizon", "20000", "--seed", "4",
                 "--joint", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["product_form"]["max_marginal_gap"] < 0.03
    again = tmp_path / "sim2.json"
    main(["simulate", "--model", str(model_file), "--horizon", "20000", "--seed", "4", "--joint",
          "--out", str(again)])
    assert out.read_bytes() == again.read_bytes()


def test_gradcheck_command(capsys):
    assert main(["gradcheck", "--seed", "7", "--trials", "10"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["passed"] and out["max_relative_error"] <= 1e-5


def test_train_and_eval_round_trip(tmp_path, capsys):
    d = toy_dir(tmp_path)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"epochs": 40, "hidden_count": 2}))
    model = tmp_path / "model.json"
    assert main(["train", "--data", str(d / "toy.csv"), "--config", str(cfg),
                 "--out", str(model), "--seed", "1", "--test-fraction", "0.2"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["epochs_run"] == 40 and summary["test_accuracy"] == 1.0
    doc = json.loads(model.read_text())
    assert doc["class_names"] == ["A", "B"] and doc["config"]["seed"] == 1
    assert main(["eval", "--model", str(model), "--data", str(d / "toy.csv")]) == 0
    ev = json.loads(capsys.readouterr().out)
    assert ev["accuracy"] == 1.0 and ev["confusion"]["support"] == [15, 15]


def test_train_rejects_unknown_config_keys(tmp_path):
    d = toy_dir(tmp_path)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"epochs": 1, "momentum": 0.5}))
    assert main(["train", "--data", str(d / "toy.csv"), "--config", str(cfg),
                 "--out", str(tmp_path / "m.json")]) == 2


def test_bench_writes_deterministic_json(tmp_path, capsys):
    d = toy_dir(tmp_path)
    cfg = tmp_path / "bench.json"
    cfg.write_text(json.dumps({"seeds": 2, "datasets": {"toy": {"epochs": 20,
                                                                "hidden_count": 1}}}))
    outs = []
    for k in range(2):
        out = tmp_path / f"r{k}.json"
        assert main(["bench", "--config", str(cfg), "--out", str(out),
                     "--data-dir", str(d)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    assert "toy" in capsys.readouterr().out


def test_fetch_data_failure_exit_code(tmp_path):
    assert main(["fetch-data", "ovarian", "--dest", str(tmp_path), "--source-dir",
                 str(tmp_path), "--no-download"]) == 1


def test_fetch_data_unknown_dataset():
    with pytest.raises(SystemExit) as info:
        main(["fetch-data", "mnist"])
    assert info.value.code == 2
