"""Scoring generated subgoal candidates and choosing one under a plan-cost budget."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, SelectionFailure
from .kinematics import RobotModel
from .time_estimator import TimeEstimatorModel, predict_t95_batch
from .world import World, config_in_collision

RANDOM = "random"
BEST_EFFORT = "best-effort"
GOAL_ORIENTED = "goal-oriented"
BASELINE = "baseline"
POLICIES = (RANDOM, BEST_EFFORT, GOAL_ORIENTED)

_FAMILY_LETTER = {"lognormal": "L", "normal": "N"}
_POLICY_LETTER = {BEST_EFFORT: "B", GOAL_ORIENTED: "G"}


@dataclass(frozen=True)
class ScoredCandidate:
    config: np.ndarray
    t95_start: float
    t95_goal: float
    in_collision: bool


@dataclass(frozen=True)
class SelectionBudget:
    t_d: float
    confidence: float = 0.95

    def __post_init__(self):
        if not self.t_d > 0:
            raise InvalidArgumentError("budget t_d must be positive")
        if not 0.0 < self.confidence < 1.0:
            raise InvalidArgumentError("confidence must lie in (0, 1)")

    @classmethod
    def from_seconds(cls, seconds: float, checks_per_second: float, confidence: float = 0.95):
        return cls(seconds * checks_per_second, confidence)


def score_candidates(robot: RobotModel, start, goal, world: World, candidates,
                     estimator: TimeEstimatorModel, confidence: float = 0.95) -> list:
    """Start-to-sample and goal-to-sample t95 for every candidate, order preserved."""
    if len(candidates) == 0:
        return []
    cands = np.asarray(candidates, dtype=float)
    k = len(cands)
    froms = np.concatenate([np.tile(start, (k, 1)), np.tile(goal, (k, 1))])
    t95 = predict_t95_batch(estimator, world, froms, np.concatenate([cands, cands]), confidence)
    return [ScoredCandidate(c, float(t95[i]), float(t95[k + i]), config_in_collision(robot, world, c))
            for i, c in enumerate(cands)]


def _free(scored) -> list:
    free = [i for i, s in enumerate(scored) if not s.in_collision]
    if not free:
        raise SelectionFailure("every candidate is in collision")
    return free


def qualifying(scored, budget: SelectionBudget) -> list:
    return [i for i in _free(scored) if scored[i].t95_start <= budget.t_d]


def _argmin(scored, idx, key) -> int:
    # min() keeps the first of equal keys, i.e. the lowest index
    return min(idx, key=lambda i: getattr(scored[i], key))


def select_best_effort(scored, budget: SelectionBudget, rng: np.random.Generator) -> int:
    """Uniform choice among candidates with ``t95_start <= t_d``; otherwise the smallest t95_start.

    Returns the index into ``scored``.
    """
    q = qualifying(scored, budget)
    if q:
        return q[int(rng.integers(len(q)))]
    return _argmin(scored, _free(scored), "t95_start")


def select_goal_oriented(scored, budget: SelectionBudget) -> int:
    """The qualifying candidate with the smallest ``t95_goal``; best-effort fallback otherwise."""
    q = qualifying(scored, budget)
    if q:
        return _argmin(scored, q, "t95_goal")
    return _argmin(scored, _free(scored), "t95_start")


def select_random(scored, rng: np.random.Generator) -> int:
    """Uniform over the collision-free candidates."""
    free = _free(scored)
    return free[int(rng.integers(len(free)))]


def variant_name(policy: str, family: str | None = None, shaping: bool = True) -> str:
    """Table-style names: ``B-L-S``, ``G-N-S``, ``B-N``, ``Random``, ``Baseline``."""
    if policy == BASELINE:
        return "Baseline"
    if policy == RANDOM:
        return "Random" if shaping else "Random-noS"
    name = f"{_POLICY_LETTER[policy]}-{_FAMILY_LETTER[family]}"
    return name + "-S" if shaping else name


def parse_variant(name: str) -> tuple:
    """Inverse of :func:`variant_name`: ``(policy, family, shaping)``."""
    if name == "Baseline":
        return BASELINE, None, False
    if name in ("Random", "Random-noS"):
        return RANDOM, None, name == "Random"
    parts = name.split("-")
    policies = {v: k for k, v in _POLICY_LETTER.items()}
    families = {v: k for k, v in _FAMILY_LETTER.items()}
    if len(parts) not in (2, 3) or parts[0] not in policies or parts[1] not in families \
            or (len(parts) == 3 and parts[2] != "S"):
        raise InvalidArgumentError(f"unknown variant {name!r}")
    return policies[parts[0]], families[parts[1]], len(parts) == 3
