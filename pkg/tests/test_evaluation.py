import math

import numpy as np
import pytest

from subgoal_planner import evaluation
from subgoal_planner.config import RunConfig
from subgoal_planner.cvae import build_cvae
from subgoal_planner.dataset import PlanningProblem
from subgoal_planner.errors import InvalidArgumentError, ModelMissingError
from subgoal_planner.evaluation import (EvalRow, EvalSettings, Models, SimSettings, eval_dynamic, eval_static,
                                        reach_goal, subgoal_reached_goal_test, summarize, validate_trace)
from subgoal_planner.kinematics import RobotModel, forward_kinematics
from subgoal_planner.planner import PlannerParams, path_length
from subgoal_planner.selection import SelectionBudget
from subgoal_planner.time_estimator import build_estimator
from subgoal_planner.world import MovingObstacle, Obstacle, World, config_in_collision


def untrained(robot):
    cvae = build_cvae(robot, seed=0)
    est = {f: build_estimator(cvae.encoder, robot, f, seed=1) for f in ("lognormal", "normal")}
    return Models(cvae, est)


@pytest.fixture
def arm_settings():
    cfg = RunConfig({"eval": {"runs_per_plan": 3, "repeats": 2}})
    return EvalSettings.from_config(cfg)


# a 2-link arm whose first link is pinched between two disks around joint 1 = 0
PINCH = World([Obstacle((0.5, 0.25), 0.15), Obstacle((0.5, -0.25), 0.15)], name="pinch")
ARM2 = RobotModel([1.0, 1.0], 0.05)


@pytest.fixture
def pinch_settings():
    return EvalSettings(ARM2, PlannerParams(max_iterations=800), np.array([2.0, 1.0]),
                        SelectionBudget(1000.0), batch=8, runs_per_plan=2, max_trials=10, repeats=1)


def test_eval_row_invariant():
    with pytest.raises(InvalidArgumentError):
        EvalRow("B-L-S", "p", 0, True, [10, 20], 31, 1.0, 2)


def test_summary_thresholds():
    rows = [EvalRow("x", "p", 0, True, [500], 500, 1.0, 1), EvalRow("x", "q", 0, False, [3000], 3000, 0.0, 1)]
    s = summarize(rows, 1000.0)
    assert s["within_1x"] == 0.5 and s["within_2x"] == 0.5 and s["within_4x"] == 1.0
    assert s["success_rate"] == 0.5 and s["mean_cost"] == 1750.0
    assert summarize([], 1000.0)["rows"] == 0


def test_goal_test_examples(pinch_settings):
    q = np.array([math.pi, 0.3])
    assert subgoal_reached_goal_test(pinch_settings, PINCH, q, q) == (True, None)
    eps = pinch_settings.goal_epsilon
    assert subgoal_reached_goal_test(pinch_settings, PINCH, q, q + np.array([eps / 2, 0.0]))[0]
    reached, leg = subgoal_reached_goal_test(pinch_settings, PINCH, q, np.array([0.0, 0.0]))
    assert not reached and leg is None
    near = q + np.array([0.1, 0.0])
    reached, leg = subgoal_reached_goal_test(pinch_settings, World(), q, near)
    assert reached and np.array_equal(leg.path[-1], near)
    with pytest.raises(InvalidArgumentError):
        subgoal_reached_goal_test(pinch_settings, PINCH, q, q, epsilon=0.0)


def test_goal_reaching_stops_at_trial_cap(pinch_settings, monkeypatch):
    calls = []
    real = evaluation.choose_subgoal

    def counting(*args, **kwargs):
        calls.append(1)
        return real(*args, **kwargs)

    monkeypatch.setattr(evaluation, "choose_subgoal", counting)
    prob = PlanningProblem("trap", PINCH, np.array([math.pi, 0.0]), np.array([0.0, 0.0]))
    row = reach_goal(prob, untrained(ARM2), "G-L-S", pinch_settings, seed=0, index=0, repeat=0)
    assert not row.success and len(calls) == 10
    assert row.subgoal_count <= 10 and row.total_cost == sum(row.subgoal_costs)


def test_static_eval_is_deterministic(arm_settings, clutter):
    probs = [PlanningProblem("a", clutter, np.array([0.2, -0.4, 0.3, 0.0]), np.array([2.6, 0.5, -0.4, 0.3])),
             PlanningProblem("b", clutter, np.array([-1.0, 0.4, 0.3, 0.0]), np.array([1.6, 0.5, -0.4, 0.3]))]
    models = untrained(arm_settings.robot)
    for mode in ("subgoal", "goal"):
        a, sa = eval_static(probs, models, "B-L-S", arm_settings, 3, mode)
        b, sb = eval_static(probs, models, "B-L-S", arm_settings, 3, mode)
        assert a == b and sa == sb
    rows, _ = eval_static(probs, models, "Random", arm_settings, 3)
    assert len(rows) == 2 * arm_settings.runs_per_plan
    base, s = eval_static(probs, Models(), "Baseline", arm_settings, 3, "goal")
    assert s["success_rate"] == 1.0 and all(r.subgoal_count == 0 for r in base)
    with pytest.raises(ModelMissingError):
        eval_static(probs, Models(models.cvae), "B-L-S", arm_settings, 3)
    with pytest.raises(InvalidArgumentError):
        eval_static(probs, models, "B-L-S", arm_settings, 3, "sideways")


def test_dynamic_without_movers(arm_settings):
    start, goal = np.array([0.2, -0.4, 0.3, 0.0]), np.array([0.9, 0.1, 0.0, 0.3])
    prob = PlanningProblem("calm", World(), start, goal)
    out = eval_dynamic(prob, [], untrained(arm_settings.robot), "G-L-S", arm_settings)
    assert out.success and out.reason == "goal reached"
    assert [e.event for e in out.trace] == ["goal-leg"]
    np.testing.assert_array_equal(out.states[-1][1], goal)
    assert validate_trace(arm_settings.robot, prob.world, [], out.states)
    # planning time plus travel at unit joint speed along the executed path
    travelled = path_length([q for _, q in out.states])
    assert travelled >= np.linalg.norm(goal - start) - 1e-12
    assert out.final_time == pytest.approx(out.trace[0].plan_cost / 20000.0 + travelled, abs=0.06)


def test_dynamic_goal_occupied_hits_trial_cap(arm_settings):
    robot = arm_settings.robot
    start, goal = np.array([0.2, -0.4, 0.3, 0.0]), np.array([2.0, 0.1, 0.0, 0.3])
    tip = forward_kinematics(robot, goal)[-1]
    parked = MovingObstacle([(0.0, tuple(tip))], 0.2)
    prob = PlanningProblem("parked", World(), start, goal)
    assert not config_in_collision(robot, World(), start)
    out = eval_dynamic(prob, [parked], untrained(robot), "G-L-S", arm_settings)
    assert not out.success and out.reason == "trial cap"
    assert len(out.trace) == arm_settings.max_trials
    assert all(e.event == "goal-blocked" for e in out.trace)
    assert validate_trace(robot, prob.world, [parked], out.states)


def test_dynamic_rejects_bad_requests(arm_settings):
    prob = PlanningProblem("x", World([Obstacle((0.5, 0.0), 0.3)]), np.zeros(4), np.ones(4))
    with pytest.raises(InvalidArgumentError):
        eval_dynamic(prob, [], untrained(arm_settings.robot), "G-L-S", arm_settings)
    with pytest.raises(InvalidArgumentError):
        eval_dynamic(prob, [], Models(), "Baseline", arm_settings)
    with pytest.raises(InvalidArgumentError):
        SimSettings(dt=0.0)


def test_scenario_round_trip(tmp_path):
    prob, movers = evaluation.desk_scenario()
    assert len(movers) == 1 and prob.world.obstacles
    evaluation.save_scenario(tmp_path / "s.json", prob, movers)
    back, back_movers = evaluation.load_scenario(tmp_path / "s.json")
    assert back.world == prob.world and back_movers == movers
    np.testing.assert_array_equal(back.start, prob.start)
    np.testing.assert_array_equal(back.goal, prob.goal)
