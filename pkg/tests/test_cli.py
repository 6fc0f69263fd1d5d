import csv
import json

import pytest

from cceq.cli import main
from cceq.game import FiniteGame, save_game
from conftest import INTERSECTION_COSTS


@pytest.fixture
def game_file(tmp_path):
    path = tmp_path / "intersection_game.json"
    save_game(FiniteGame((2, 2), INTERSECTION_COSTS), path)
    return path


def test_run_subcommand(tmp_path, capsys):
    out = tmp_path / "results.csv"
    rc = main([
        "run", "--methods", "fcfs,rr-nominal", "--trials", "2",
        "--flights", "6..7", "--alpha", "0.9", "--sigma", "0",
        "--seed", "5", "--airlines", "3", "--out", str(out),
    ])
    assert rc == 0
    rows = list(csv.reader(out.open()))
    assert len(rows) == 1 + 2 * 2 * 2
    printed = capsys.readouterr().out
    assert "rr-nominal" in printed and "wrote" in printed


def test_run_with_config_file(tmp_path, capsys):
    out = tmp_path / "out.csv"
    config = {
        "methods": ["fcfs"], "num_trials": 1, "flight_counts": [6],
        "num_airlines": 3, "uncertainty": {"sigma": 1.0},
        "out": str(out), "master_seed": 1,
    }
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(config))
    assert main(["run", "--config", str(cfg_path)]) == 0
    assert out.exists()


def test_run_bad_config_exits_2(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"methods": ["bogus"]}))
    assert main(["run", "--config", str(cfg)]) == 2


def test_run_missing_config_exits_1(tmp_path):
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 1


def test_check_distribution(game_file, tmp_path, capsys):
    dist = tmp_path / "dist.json"
    dist.write_text(json.dumps({"mass": [0.0, 0.5, 0.5, 0.0]}))
    rc = main(["check", "--game-file", str(game_file), "--alpha", "0.9",
               "--sigma", "1.0", "--dist-file", str(dist)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "feasible: true" in out
    assert "-0.7184" in out

    rc = main(["check", "--game-file", str(game_file), "--alpha", "0.99",
               "--sigma", "1.0", "--dist-file", str(dist)])
    assert rc == 0
    assert "feasible: false" in capsys.readouterr().out


def test_check_polytope_mode(game_file, capsys):
    rc = main(["check", "--game-file", str(game_file), "--alpha", "0.9", "--sigma", "1.0"])
    assert rc == 0
    assert "nonempty: true" in capsys.readouterr().out
    rc = main(["check", "--game-file", str(game_file), "--alpha", "0.99", "--sigma", "9.0"])
    assert rc == 0
    assert "nonempty: false" in capsys.readouterr().out


def test_enumerate_pne(game_file, capsys):
    rc = main(["enumerate-pne", "--game-file", str(game_file),
               "--alpha", "0.9", "--sigma", "1.0"])
    assert rc == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "0 1"
    assert out[1] == "1 0"
    assert "found 2" in out[2]


def test_enumerate_pne_limit(game_file, capsys):
    rc = main(["enumerate-pne", "--game-file", str(game_file),
               "--alpha", "0.9", "--sigma", "0", "--limit", "1"])
    assert rc == 0
    assert "found 1" in capsys.readouterr().out


def test_check_bad_game_file_exits_1(tmp_path):
    rc = main(["check", "--game-file", str(tmp_path / "nope.json"),
               "--alpha", "0.9", "--sigma", "1"])
    assert rc == 1


def test_per_agent_sigma_parsing(game_file, capsys):
    rc = main(["enumerate-pne", "--game-file", str(game_file),
               "--alpha", "0.9", "--sigma", "1.0,2.0"])
    assert rc == 0
    assert "found" in capsys.readouterr().out


def test_run_exit_zero_despite_per_trial_failures(tmp_path, capsys):
    # sub-nanosecond budget forces timeout statuses; the batch still completes
    out = tmp_path / "t.csv"
    rc = main(["run", "--methods", "full-ccce", "--trials", "2", "--flights", "6",
               "--airlines", "3", "--seed", "0", "--sigma", "0",
               "--time-budget", "1e-9", "--out", str(out)])
    assert rc == 0
    rows = list(csv.reader(out.open()))
    assert all(row[5] == "timeout" for row in rows[1:])


def test_console_script_installed():
    import shutil
    import subprocess
    exe = shutil.which("cceq")
    if exe is None:
        pytest.skip("console script not on PATH")
    proc = subprocess.run([exe, "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "enumerate-pne" in proc.stdout
