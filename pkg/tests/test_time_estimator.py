import math

import numpy as np
import pytest
from conftest import synthetic_rows

from subgoal_planner.cvae import build_cvae
from subgoal_planner.distributions import LOGNORMAL, NORMAL, DistParams, fit_empirical, nll
from subgoal_planner.errors import InvalidArgumentError, ModelMissingError, TrainingError
from subgoal_planner.kinematics import FeatureParams, RobotModel
from subgoal_planner.neuralnet import gradient_check
from subgoal_planner.time_estimator import (batch_loss, build_estimator, estimator_loss, load_estimator,
                                            predict_distribution, predict_t95, rows_from_records,
                                            save_estimator, train_estimator, training_arrays)
from subgoal_planner.world import Obstacle, World, random_world
from subgoal_planner.dataset import WaypointRecord

ROBOT = RobotModel([1.0, 0.8], 0.05)
FP = FeatureParams(0.5, 1)
WORLD = World([Obstacle((1.0, 1.0), 0.2)])


def tiny(family=LOGNORMAL, w=1.0, hidden=(6,), seed=0):
    enc = build_cvae(ROBOT, FP, 2, 0.01, 2, (5,), 3, (6,), seed=seed).encoder
    return build_estimator(enc, ROBOT, family, w, FP, 2, hidden, seed=seed + 1)


def record(costs_s=(12, 30, 18, 55, 22), costs_g=(40, 41, 90, 33, 60)):
    return WaypointRecord.from_costs("p", WORLD, np.array([0.1, 0.2]), np.array([1.0, -0.5]),
                                     np.array([0.5, 0.5]), costs_s, costs_g)


def _set_head_output(model, mu, log_sigma):
    for w in model.head.weights:
        w[:] = 0
    for b in model.head.biases:
        b[:] = 0
    model.head.biases[-1][:] = [mu, log_sigma]


@pytest.mark.parametrize("family", [LOGNORMAL, NORMAL])
def test_loss_at_empirical_theta(family):
    model = tiny(family, w=2.0, hidden=())
    model.shift, model.scale = 1.5, 0.8
    rec = record()
    c = np.asarray(rec.from_start_costs, dtype=float)
    y = ((np.log(c) if family == LOGNORMAL else c) - 1.5) / 0.8
    fit = fit_empirical(y, NORMAL)
    _set_head_output(model, fit.mu, math.log(fit.sigma))
    assert estimator_loss(model, rec) == pytest.approx(nll(fit, y), abs=1e-12)
    # w = 0 leaves the pure NLL for any prediction
    model.w = 0.0
    _set_head_output(model, 0.3, -0.2)
    assert estimator_loss(model, rec) == pytest.approx(nll(DistParams(NORMAL, 0.3, math.exp(-0.2)), y), abs=1e-12)
    with pytest.raises(InvalidArgumentError):
        estimator_loss(model, rec, "sideways")


def test_goal_direction_uses_goal_costs():
    model = tiny(w=0.0, hidden=())
    _set_head_output(model, 3.0, 0.0)
    rec = record()
    y = np.log(np.asarray(rec.from_goal_costs, dtype=float))
    assert estimator_loss(model, rec, "goal") == pytest.approx(nll(DistParams(NORMAL, 3.0, 1.0), y), abs=1e-12)


@pytest.mark.parametrize("family", [LOGNORMAL, NORMAL])
def test_gradients_match_finite_differences(family):
    rng = np.random.default_rng(0)
    rows = synthetic_rows(ROBOT, [WORLD], 6, rng, runs=5)
    model = tiny(family, w=0.7)
    model, _ = train_estimator(model, rows, 0)  # fits the normalization only
    arrays = training_arrays(model, rows)
    _, grads = batch_loss(model, *arrays)
    assert gradient_check(lambda: batch_loss(model, *arrays)[0], model.head.params(), grads) < 1e-4


def test_training_contracts():
    rng = np.random.default_rng(1)
    rows = synthetic_rows(ROBOT, [WORLD], 60, rng, runs=8)
    model = tiny()
    enc_before = model.encoder.copy()
    same, hist = train_estimator(model, rows, 0)
    assert same.head.equals(model.head) and hist == []
    a, ha = train_estimator(model, rows, 5, seed=3)
    b, hb = train_estimator(model, rows, 5, seed=3)
    assert a.head.equals(b.head) and ha == hb
    assert model.encoder.equals(enc_before) and a.encoder.equals(enc_before)
    with pytest.raises(TrainingError):
        train_estimator(model, [], 1)
    with pytest.raises(InvalidArgumentError):
        build_estimator(model.encoder, ROBOT, "gamma")


def test_rows_from_records():
    rows = rows_from_records([record()])
    assert len(rows) == 2
    np.testing.assert_array_equal(rows[0].from_config, [0.1, 0.2])
    np.testing.assert_array_equal(rows[1].from_config, [1.0, -0.5])
    assert rows[1].costs == (40, 41, 90, 33, 60)


def test_prediction_properties(tmp_path):
    model = tiny()
    q, c = np.array([0.2, 0.3]), np.array([1.0, -1.0])
    t = predict_t95(model, WORLD, q, c)
    assert t > 0 and t == predict_t95(model, WORLD, q, c)
    assert predict_t95(model, WORLD, q, c, 0.99) > predict_t95(model, WORLD, q, c, 0.8)
    save_estimator(model, tmp_path / "t.json")
    back = load_estimator(tmp_path / "t.json")
    assert back.head.equals(model.head) and back.encoder.equals(model.encoder)
    assert predict_distribution(back, WORLD, q, c) == predict_distribution(model, WORLD, q, c)
    with pytest.raises(ModelMissingError):
        load_estimator(tmp_path / "none.json")


def test_synthetic_zero_distance_is_cheap():
    robot = RobotModel([0.8, 0.7, 0.6, 0.5], 0.05)
    rng = np.random.default_rng(11)
    worlds = [random_world(rng, f"s{k}") for k in range(20)]
    rows = synthetic_rows(robot, worlds, 1500, rng, near=True)
    enc = build_cvae(robot, seed=0).encoder
    est, _ = train_estimator(build_estimator(enc, robot, LOGNORMAL, seed=1), rows, 100, seed=1)
    ratios, near_far = [], []
    for r in rows[:20]:
        t_self = predict_t95(est, r.world, r.from_config, r.from_config)
        # true zero-distance t95 of the generator
        true_self = 30.0 * math.exp(0.3 * len(r.world.obstacles) + 0.4 * 1.6448536)
        ratios.append(t_self / true_self)
        far = np.where(r.from_config > 0, robot.lo, robot.hi)  # opposite corner of the joint box
        near_far.append(t_self < predict_t95(est, r.world, r.from_config, far))
    assert 0.5 < np.median(ratios) < 2.0
    assert np.mean(near_far) >= 0.9
