import numpy as np
import pytest

from subgoal_planner.dataset import (PlanningProblem, WaypointRecord, filter_training_set,
                                     generate_problems, label_waypoints, load_dataset, load_problems,
                                     resample_path, save_dataset, save_problems)
from subgoal_planner.distributions import LOGNORMAL, NORMAL, SIGMA_MIN, fit_empirical
from subgoal_planner.errors import DatasetParseError, GenerationError, InvalidArgumentError
from subgoal_planner.planner import PlannerParams, path_valid
from subgoal_planner.world import Obstacle, World, config_in_collision, random_world

FAST = PlannerParams(max_iterations=3000)


def test_generate_problems_empty_world(arm4):
    probs = generate_problems([World()], arm4, 10, seed=1, params=FAST)
    assert len(probs) == 10 and len({p.id for p in probs}) == 10
    for p in probs:
        assert path_valid(arm4, p.world, p.witness, FAST.resolution)
        assert np.array_equal(p.witness[0], p.start) and np.array_equal(p.witness[-1], p.goal)
    again = generate_problems([World()], arm4, 10, seed=1, params=FAST)
    assert probs == again


def test_generate_problems_errors(arm4):
    blocked = World([Obstacle((0.0, 0.0), 0.5)], name="blocked")
    with pytest.raises(GenerationError, match="blocked"):
        generate_problems([blocked], arm4, 1, seed=0, max_tries=50)
    with pytest.raises(InvalidArgumentError):
        generate_problems([World()], arm4, 0, seed=0)
    with pytest.raises(InvalidArgumentError):
        generate_problems([], arm4, 3, seed=0)


def test_resample_path():
    path = [np.zeros(2), np.array([2.5, 0.0])]
    pts = resample_path(path, 1.0)
    np.testing.assert_allclose(pts, [[1.0, 0.0], [2.0, 0.0], [2.5, 0.0]])
    assert resample_path([np.zeros(2)], 1.0) == []
    pts = resample_path([np.zeros(2), np.array([1.0, 0.0]), np.array([1.0, 1.0])], 0.75)
    np.testing.assert_allclose(pts, [[0.75, 0.0], [1.0, 0.5], [1.0, 1.0]])


@pytest.fixture(scope="module")
def labeled():
    from subgoal_planner.kinematics import RobotModel
    arm = RobotModel([0.8, 0.7, 0.6, 0.5], 0.05)
    rng = np.random.default_rng(5)
    worlds = [random_world(rng, f"w{k}") for k in range(3)]
    probs = generate_problems(worlds, arm, 3, seed=2, params=FAST)
    recs = [r for p in probs for r in label_waypoints(p, arm, 8, FAST, 1.0, 50, include_start=True)]
    return arm, probs, recs


def test_label_waypoints(labeled):
    arm, probs, recs = labeled
    assert recs
    for r in recs:
        assert not config_in_collision(arm, r.world, r.waypoint)
        assert len(r.from_start_costs) == len(r.from_goal_costs) == 8
        assert min(r.from_start_costs + r.from_goal_costs) >= 1
        assert r.theta_lognormal.sigma >= SIGMA_MIN[LOGNORMAL]
        assert fit_empirical(r.from_start_costs, NORMAL) == r.theta_normal
        assert fit_empirical(r.from_goal_costs, LOGNORMAL) == r.goal_theta_lognormal
    # waypoint = start: every run is the two endpoint checks, so the fit is degenerate
    at_start = [r for r in recs if np.array_equal(r.waypoint, r.start)]
    assert len(at_start) == len(probs)
    for r in at_start:
        assert set(r.from_start_costs) == {2}
        assert r.theta_lognormal.sigma == SIGMA_MIN[LOGNORMAL]
    again = label_waypoints(probs[0], arm, 8, FAST, 1.0, 50, include_start=True)
    assert again == [r for r in recs if r.problem_id == probs[0].id]


def test_label_waypoints_errors(arm4):
    p = PlanningProblem("x", World(), np.zeros(4), np.ones(4))
    with pytest.raises(InvalidArgumentError):
        label_waypoints(p, arm4, 5)
    with pytest.raises(InvalidArgumentError):
        label_waypoints(PlanningProblem("y", World(), np.zeros(4), np.ones(4), [np.zeros(4), np.ones(4)]),
                        arm4, 1)


def _rec(costs):
    return WaypointRecord.from_costs("p", World(), np.zeros(2), np.ones(2), np.full(2, 0.5), costs, [5, 6])


def test_filter_examples():
    recs = [_rec([10, 20, 30]), _rec([500, 600, 700]), _rec([100] * 29 + [10 ** 6])]  # 30 runs: the 95th percentile is 100
    assert filter_training_set(recs, float("inf")) == recs
    assert filter_training_set(recs, 200)[-1] is recs[2]
    assert filter_training_set(recs, 200) == [recs[0], recs[2]]
    assert filter_training_set(recs, 200, "max") == [recs[0]]
    once = filter_training_set(recs, 200)
    assert filter_training_set(once, 200) == once
    assert filter_training_set(recs, 1) == []
    with pytest.raises(InvalidArgumentError):
        filter_training_set(recs, 0)


def test_persistence_round_trip(tmp_path, labeled):
    _, probs, recs = labeled
    save_dataset(recs, tmp_path / "d.jsonl")
    back = load_dataset(tmp_path / "d.jsonl")
    assert back == recs
    assert all(np.array_equal(a.waypoint, b.waypoint) for a, b in zip(back, recs))
    save_problems(probs, tmp_path / "p.jsonl")
    assert load_problems(tmp_path / "p.jsonl") == probs
    save_dataset([], tmp_path / "e.jsonl")
    assert (tmp_path / "e.jsonl").read_text() == "" and load_dataset(tmp_path / "e.jsonl") == []


def test_many_records_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    w = World([Obstacle((1.0, 1.0), 0.3)])
    recs = [WaypointRecord.from_costs(f"p{i}", w, rng.normal(size=4), rng.normal(size=4), rng.normal(size=4),
                                      rng.integers(1, 10 ** 5, 5), rng.integers(1, 10 ** 5, 5))
            for i in range(1000)]
    save_dataset(recs, tmp_path / "d.jsonl")
    assert load_dataset(tmp_path / "d.jsonl") == recs


def test_truncated_line_reports_line_number(tmp_path, labeled):
    _, _, recs = labeled
    save_dataset(recs[:3], tmp_path / "d.jsonl")
    lines = (tmp_path / "d.jsonl").read_text().splitlines()
    lines[1] = lines[1][: len(lines[1]) // 2]
    (tmp_path / "d.jsonl").write_text("\n".join(lines) + "\n")
    with pytest.raises(DatasetParseError) as info:
        load_dataset(tmp_path / "d.jsonl")
    assert info.value.lineno == 2
