import json

import numpy as np
import pytest

from subgoal_planner.config import DEFAULTS, RunConfig
from subgoal_planner.errors import ConfigError


def test_defaults_and_accessors():
    cfg = RunConfig()
    assert cfg.robot().n == 4
    assert cfg.budget().t_d == pytest.approx(1000.0)
    assert cfg.checks(0.05) == pytest.approx(1000.0)
    np.testing.assert_allclose(cfg.paddings(), [3.0, 7 / 3, 5 / 3, 1.0])
    assert cfg.planner_params(seed=4).seed == 4


def test_nested_and_dotted_overrides_agree():
    a = RunConfig({"planner": {"step_size": 0.2}, "range.paddings": [1, 1, 1, 1]})
    b = RunConfig({"planner.step_size": 0.2, "range": {"paddings": [1, 1, 1, 1]}})
    assert a == b and a["planner.step_size"] == 0.2
    np.testing.assert_array_equal(a.paddings(), np.ones(4))


def test_rejects_bad_configs(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig({"planner.stepsize": 0.2})
    with pytest.raises(ConfigError):
        RunConfig({"robot.n": 3})
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ConfigError):
        RunConfig.load(tmp_path / "bad.json")
    (tmp_path / "list.json").write_text("[1, 2]")
    with pytest.raises(ConfigError):
        RunConfig.load(tmp_path / "list.json")
    with pytest.raises(ConfigError):
        RunConfig.load(tmp_path / "missing.json")


def test_dump_load_round_trip(tmp_path):
    cfg = RunConfig({"sim": {"cycle_seconds": 0.5}})
    cfg.dump(tmp_path / "c.json")
    assert RunConfig.load(tmp_path / "c.json") == cfg
    assert set(json.loads((tmp_path / "c.json").read_text())) == set(DEFAULTS)
