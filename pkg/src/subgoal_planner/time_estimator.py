"""Learned plan-cost distributions for (world, from-config, candidate) queries.

The head network reads frozen condition features from the CVAE encoder together
with the encoded from-config and candidate, and predicts ``(mu, log sigma)`` of
the plan cost in a dataset-normalized space:

* ``lognormal``: ``y = (ln checks - shift) / scale``
* ``normal``:    ``y = (checks - shift) / scale``

Both families are normal in ``y``; predictions are mapped back to checks with
:func:`predict_distribution`.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .distributions import LOGNORMAL, NORMAL, SIGMA_MIN, DistParams, fit_empirical, quantile
from .errors import InvalidArgumentError, ModelMissingError, TrainingError
from .kinematics import FeatureParams, RobotModel, encoding_dim, positional_encode
from .neuralnet import AdamState, DenseNetwork, adam_step
from .world import K_MAX, World, encode_world

log = logging.getLogger(__name__)

LOG_SIGMA_CEIL = 3.0
CHECKPOINT_KIND = "subgoal-planner/time"
CHECKPOINT_VERSION = 1
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass
class TimeEstimatorModel:
    robot: RobotModel
    encoder: DenseNetwork  # shared with the CVAE and never updated here
    head: DenseNetwork
    family: str = LOGNORMAL
    w: float = 1.0
    shift: float = 0.0
    scale: float = 1.0
    feature_params: FeatureParams = FeatureParams()
    k_max: int = K_MAX

    @property
    def log_sigma_floor(self) -> float:
        return math.log(SIGMA_MIN[self.family] / self.scale)

    def copy(self) -> "TimeEstimatorModel":
        return TimeEstimatorModel(self.robot, self.encoder, self.head.copy(), self.family, self.w,
                                  self.shift, self.scale, self.feature_params, self.k_max)


@dataclass(frozen=True)
class EstimatorRow:
    """One training query: plan-cost samples for ``from_config -> candidate``."""

    world: World
    from_config: np.ndarray
    candidate: np.ndarray
    costs: tuple


def build_estimator(encoder: DenseNetwork, robot: RobotModel, family: str = LOGNORMAL,
                    w: float = 1.0, feature_params: FeatureParams = FeatureParams(),
                    k_max: int = K_MAX, hidden=(64, 64), seed: int = 0) -> TimeEstimatorModel:
    if family not in (NORMAL, LOGNORMAL):
        raise InvalidArgumentError(f"unknown family {family!r}")
    n_in = encoder.n_out + 2 * encoding_dim(robot.n, feature_params.levels)
    head = DenseNetwork([n_in, *hidden, 2], seed=seed)
    return TimeEstimatorModel(robot, encoder, head, family, w, 0.0, 1.0, feature_params, k_max)


def rows_from_records(records) -> list:
    """Both directions of every waypoint record: start -> waypoint and goal -> waypoint."""
    rows = []
    for r in records:
        rows.append(EstimatorRow(r.world, np.asarray(r.start), np.asarray(r.waypoint),
                                 tuple(r.from_start_costs)))
        rows.append(EstimatorRow(r.world, np.asarray(r.goal), np.asarray(r.waypoint),
                                 tuple(r.from_goal_costs)))
    return rows


def head_inputs(model: TimeEstimatorModel, world: World, froms, cands) -> np.ndarray:
    """Head input rows for one world and paired from-configs / candidates."""
    froms = np.atleast_2d(np.asarray(froms, dtype=float))
    cands = np.atleast_2d(np.asarray(cands, dtype=float))
    lv = model.feature_params.levels
    pf = positional_encode(froms, lv)
    pc = positional_encode(cands, lv)
    slots = np.tile(encode_world(world, model.k_max), (len(froms), 1))
    h = model.encoder(np.concatenate([slots, pf, pc], axis=1))
    return np.concatenate([h, pf, pc], axis=1)


def _transform(model: TimeEstimatorModel, costs) -> np.ndarray:
    c = np.asarray(costs, dtype=float)
    if model.family == LOGNORMAL:
        c = np.log(c)
    return (c - model.shift) / model.scale


def empirical_theta(model: TimeEstimatorModel, costs) -> tuple[float, float]:
    """Empirical ``(mu, ln sigma)`` of the costs in the model's normalized space."""
    p = fit_empirical(costs, model.family)
    return (p.mu - model.shift) / model.scale, math.log(p.sigma / model.scale)


def _head_params(model, out):
    mu = out[:, 0]
    raw = out[:, 1]
    ls = np.clip(raw, model.log_sigma_floor, LOG_SIGMA_CEIL)
    return mu, raw, ls


def _row_stats(model: TimeEstimatorModel, rows):
    ybar, y2, th_mu, th_ls = [], [], [], []
    for r in rows:
        y = _transform(model, r.costs)
        ybar.append(np.mean(y))
        y2.append(np.mean(y * y))
        m, s = empirical_theta(model, r.costs)
        th_mu.append(m)
        th_ls.append(s)
    return np.array(ybar), np.array(y2), np.array(th_mu), np.array(th_ls)


def _loss_terms(model, out, ybar, y2, th_mu, th_ls):
    """Per-row loss plus its gradient with respect to the head output."""
    mu, raw, ls = _head_params(model, out)
    var = np.exp(2.0 * ls)
    msq = y2 - 2.0 * mu * ybar + mu * mu
    nll = ls + _HALF_LOG_2PI + 0.5 * msq / var
    dmu = mu - th_mu
    dls = ls - th_ls
    loss = nll + model.w * (dmu * dmu + dls * dls)
    g_mu = (mu - ybar) / var + 2.0 * model.w * dmu
    g_ls = 1.0 - msq / var + 2.0 * model.w * dls
    g_ls = np.where((raw > model.log_sigma_floor) & (raw < LOG_SIGMA_CEIL), g_ls, 0.0)
    return loss, np.stack([g_mu, g_ls], axis=1)


def batch_loss(model: TimeEstimatorModel, inputs, ybar, y2, th_mu, th_ls):
    """Mean loss and head-parameter gradients; no gradient reaches the encoder."""
    out, acts = model.head.forward(inputs, keep=True)
    loss, g_out = _loss_terms(model, out, ybar, y2, th_mu, th_ls)
    grads, _ = model.head.backward(acts, g_out / len(loss))
    return float(np.mean(loss)), grads


def estimator_loss(model: TimeEstimatorModel, record, direction: str = "start") -> float:
    """Normalized-space NLL of a record's costs plus ``w * |theta - theta_hat|^2``."""
    if direction == "start":
        row = EstimatorRow(record.world, record.start, record.waypoint, tuple(record.from_start_costs))
    elif direction == "goal":
        row = EstimatorRow(record.world, record.goal, record.waypoint, tuple(record.from_goal_costs))
    else:
        raise InvalidArgumentError(f"direction must be 'start' or 'goal', got {direction!r}")
    inputs = head_inputs(model, row.world, row.from_config, row.candidate)
    stats = _row_stats(model, [row])
    out = model.head(inputs)
    loss, _ = _loss_terms(model, out, *stats)
    return float(loss[0])


def fit_normalization(family: str, rows) -> tuple[float, float]:
    c = np.concatenate([np.asarray(r.costs, dtype=float) for r in rows])
    if family == LOGNORMAL:
        c = np.log(c)
    scale = float(np.std(c))
    return float(np.mean(c)), scale if scale > 0 else 1.0


def training_arrays(model: TimeEstimatorModel, rows):
    by_world = {}
    for i, r in enumerate(rows):
        by_world.setdefault(id(r.world), []).append(i)
    inputs = np.empty((len(rows), model.head.n_in))
    for idx in by_world.values():
        w = rows[idx[0]].world
        inputs[idx] = head_inputs(model, w, [rows[i].from_config for i in idx],
                                  [rows[i].candidate for i in idx])
    return (inputs,) + _row_stats(model, rows)


def train_estimator(model: TimeEstimatorModel, rows, epochs: int, seed: int = 0,
                    batch_size: int = 128, lr: float = 1e-3, normalize: bool = True):
    """Train a copy of the head on estimator rows; returns ``(model, history)``.

    ``normalize`` refits the cost normalization from ``rows`` before training.
    """
    if len(rows) == 0:
        raise TrainingError("refusing to train the time estimator on an empty dataset")
    model = model.copy()
    if normalize:
        model.shift, model.scale = fit_normalization(model.family, rows)
    arrays = training_arrays(model, rows)
    rng = np.random.default_rng(seed)
    params = model.head.params()
    state = AdamState.zeros_like(params, lr=lr)
    history = []
    N = len(rows)
    for epoch in range(epochs):
        order = rng.permutation(N)
        total = 0.0
        for start in range(0, N, batch_size):
            idx = order[start: start + batch_size]
            loss, grads = batch_loss(model, *(a[idx] for a in arrays))
            adam_step(params, grads, state)
            total += loss * len(idx)
        history.append(total / N)
        log.debug("time estimator epoch %d loss %.5f", epoch + 1, history[-1])
    return model, history


def predict_distributions(model: TimeEstimatorModel, world: World, froms, cands) -> list:
    """Predicted cost distributions in checks (log-checks for the log-normal family)."""
    out = model.head(head_inputs(model, world, froms, cands))
    mu, _, ls = _head_params(model, out)
    return [DistParams(model.family, model.shift + model.scale * m, model.scale * math.exp(s))
            for m, s in zip(mu, ls)]


def predict_distribution(model: TimeEstimatorModel, world: World, from_config, candidate) -> DistParams:
    return predict_distributions(model, world, [from_config], [candidate])[0]


def predict_t95_batch(model: TimeEstimatorModel, world: World, froms, cands,
                      confidence: float = 0.95) -> np.ndarray:
    dists = predict_distributions(model, world, froms, cands)
    # a plan always costs at least one check; keeps normal-family thresholds positive
    return np.array([max(quantile(d, confidence), 1.0) for d in dists])


def predict_t95(model: TimeEstimatorModel, world: World, from_config, candidate,
                confidence: float = 0.95) -> float:
    """Predicted ``confidence``-quantile of the plan cost, in collision checks."""
    return float(predict_t95_batch(model, world, [from_config], [candidate], confidence)[0])


def save_estimator(model: TimeEstimatorModel, path) -> None:
    doc = {
        "kind": CHECKPOINT_KIND,
        "version": CHECKPOINT_VERSION,
        "family": model.family,
        "w": model.w,
        "shift": model.shift,
        "scale": model.scale,
        "robot": model.robot.to_dict(),
        "feature_params": {"alpha": model.feature_params.alpha, "levels": model.feature_params.levels},
        "k_max": model.k_max,
        "encoder": model.encoder.to_dict(),
        "head": model.head.to_dict(),
    }
    Path(path).write_text(json.dumps(doc))


def load_estimator(path) -> TimeEstimatorModel:
    path = Path(path)
    if not path.exists():
        raise ModelMissingError(f"time-estimator checkpoint not found: {path}")
    doc = json.loads(path.read_text())
    if doc.get("kind") != CHECKPOINT_KIND or doc.get("version") != CHECKPOINT_VERSION:
        raise InvalidArgumentError(f"{path} is not a version-{CHECKPOINT_VERSION} time checkpoint")
    fp = doc["feature_params"]
    return TimeEstimatorModel(RobotModel.from_dict(doc["robot"]), DenseNetwork.from_dict(doc["encoder"]),
                              DenseNetwork.from_dict(doc["head"]), doc["family"], doc["w"],
                              doc["shift"], doc["scale"], FeatureParams(fp["alpha"], fp["levels"]),
                              doc["k_max"])
