"""Run configuration: one flat key-value document holding every tunable default.

Files are JSON; nested objects are flattened into dotted keys, so
``{"planner": {"step_size": 0.2}}`` and ``{"planner.step_size": 0.2}`` are
equivalent. Unknown keys are rejected.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .kinematics import FeatureParams, RobotModel
from .planner import PlannerParams, default_paddings
from .selection import SelectionBudget

DEFAULTS = {
    "robot.n": 4,
    "robot.links": [0.8, 0.7, 0.6, 0.5],
    "robot.link_radius": 0.05,
    "robot.joint_lo": None,  # None means -2*pi on every joint
    "robot.joint_hi": None,  # None means +2*pi on every joint
    "world.k_max": 8,
    "world.bounds": [-3.0, -3.0, 3.0, 3.0],
    "world.count_min": 4,
    "world.count_max": 8,
    "world.radius_min": 0.2,
    "world.radius_max": 0.4,
    "world.ring_min": 0.7,
    "world.ring_max": 2.8,
    "world.pool": 20,
    "features.alpha": 0.5,
    "features.levels": 2,
    "planner.step_size": 0.3,
    "planner.max_iterations": 10000,
    "planner.resolution": 0.05,
    "cost.checks_per_second": 20000.0,
    "range.paddings": None,  # None means linear from range.base_padding to range.distal_padding
    "range.base_padding": 3.0,
    "range.distal_padding": 1.0,
    "shortcut.iterations": 100,
    "dataset.count": 5000,
    "dataset.runs": 30,
    "dataset.waypoint_spacing": 1.0,
    "dataset.budget_seconds": 0.05,
    "dataset.filter_mode": "percentile",
    "dataset.witness_iterations": 3000,
    "nn.lr": 1e-3,
    "nn.beta1": 0.9,
    "nn.beta2": 0.999,
    "nn.eps": 1e-8,
    "nn.batch_size": 128,
    "cvae.latent_dim": 4,
    "cvae.beta": 0.01,
    "cvae.batch": 32,
    "cvae.encoder_hidden": [64],
    "cvae.condition_dim": 32,
    "cvae.hidden": [64, 64],
    "cvae.epochs": 50,
    "cvae.batch_size": 32,  # training minibatch; cvae.batch is the candidate count
    "time.family": "lognormal",
    "time.w": 1.0,
    "time.hidden": [64, 64],
    "time.epochs": 50,
    "select.budget_seconds": 0.05,
    "select.confidence": 0.95,
    "select.shaping": True,
    "eval.runs_per_plan": 30,
    "eval.max_trials": 10,
    "eval.repeats": 10,
    "eval.goal_epsilon": 1e-6,
    "eval.hard_runs": 30,
    "sim.joint_speed": 1.0,
    "sim.cycle_seconds": 1.0,
    "sim.dt": 0.05,
    "sim.duration": 60.0,
}


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


class RunConfig(dict):
    """Dict of dotted keys with defaults filled in and typed accessors."""

    def __init__(self, overrides: dict | None = None):
        super().__init__(DEFAULTS)
        flat = _flatten(overrides or {})
        unknown = sorted(set(flat) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        self.update(flat)
        if self["robot.n"] != len(self["robot.links"]):
            raise ConfigError("robot.n must equal the number of robot.links")

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
        return cls(doc)

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(dict(self), indent=1, sort_keys=True) + "\n")

    def robot(self) -> RobotModel:
        return RobotModel(self["robot.links"], self["robot.link_radius"],
                          self["robot.joint_lo"], self["robot.joint_hi"])

    def feature_params(self) -> FeatureParams:
        return FeatureParams(self["features.alpha"], self["features.levels"])

    def planner_params(self, seed: int = 0) -> PlannerParams:
        return PlannerParams(self["planner.step_size"], self["planner.max_iterations"],
                             self["planner.resolution"], seed)

    def paddings(self) -> np.ndarray:
        p = self["range.paddings"]
        if p is None:
            return default_paddings(self["robot.n"], self["range.base_padding"], self["range.distal_padding"])
        return np.asarray(p, dtype=float)

    def checks(self, seconds: float) -> float:
        """Convert a time budget to collision checks."""
        return seconds * self["cost.checks_per_second"]

    def budget(self) -> SelectionBudget:
        return SelectionBudget(self.checks(self["select.budget_seconds"]), self["select.confidence"])
