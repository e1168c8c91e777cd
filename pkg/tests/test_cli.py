import json

import pytest

from subgoal_planner.cli import EXIT_CONFIG, EXIT_DATA, EXIT_MODEL, main

SMALL = {"world": {"pool": 2}, "eval": {"runs_per_plan": 2, "hard_runs": 2},
         "cvae": {"epochs": 2, "batch": 8}, "time": {"epochs": 2}, "dataset": {"runs": 3},
         "planner": {"max_iterations": 3000}}


def run_pipeline(root, cfg_path):
    def cli(*args):
        assert main([*args, "--config", str(cfg_path), "--out-dir", str(root)]) == 0

    cli("gen-worlds")
    cli("gen-data", "--worlds", str(root / "worlds"), "--count", "3")
    cli("train-cvae", "--data", str(root / "data.jsonl"))
    cli("train-time", "--data", str(root / "data.jsonl"), "--cvae", str(root / "cvae.json"))
    cli("gen-problems", "--worlds", str(root / "worlds"), "--count", "3", "--seed", "5")
    cli("eval-static", "--problems", str(root / "problems.jsonl"), "--cvae", str(root / "cvae.json"),
        "--time-lognormal", str(root / "time_lognormal.json"), "--variants", "Baseline,Random,B-L-S")
    cli("export", "--rows", str(root / "static_subgoal.csv"))
    return root


@pytest.mark.slow
def test_pipeline_is_deterministic(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(SMALL))
    a = run_pipeline(tmp_path / "a", cfg)
    b = run_pipeline(tmp_path / "b", cfg)
    for name in ("data.jsonl", "cvae.json", "time_lognormal.json", "static_subgoal.csv", "results.csv",
                 "results.svg", "static_subgoal_summary.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    lines = (a / "static_subgoal.csv").read_text().splitlines()
    assert len(lines) == 1 + 3 * 3 * 2


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"no.such_key": 1}))
    assert main(["gen-worlds", "--config", str(bad), "--out-dir", str(tmp_path)]) == EXIT_CONFIG
    assert main(["gen-data", "--worlds", str(tmp_path / "nowhere"), "--out-dir", str(tmp_path)]) == EXIT_DATA
    (tmp_path / "junk.jsonl").write_text("{oops\n")
    assert main(["train-cvae", "--data", str(tmp_path / "junk.jsonl")]) == EXIT_DATA
    assert main(["eval-static", "--problems", str(tmp_path / "junk.jsonl")]) == EXIT_MODEL
    assert main(["eval-dynamic", "--cvae", str(tmp_path / "missing.json")]) == EXIT_MODEL
    err = capsys.readouterr().err
    assert "configuration error" in err and "missing model" in err


def test_help_lists_commands(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--help"])
    assert info.value.code == 0
    out = capsys.readouterr().out
    for cmd in ("gen-worlds", "gen-problems", "gen-data", "train-cvae", "train-time", "eval-static",
                "eval-dynamic", "export"):
        assert cmd in out
