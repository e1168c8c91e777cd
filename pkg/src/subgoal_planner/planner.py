"""Seeded RRT-Connect with collision-check cost accounting, shortcutting and range shaping."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import InvalidArgumentError, InvalidRequestError
from .kinematics import RobotModel
from .world import World, edge_valid

BOUND_TOL = 1e-12


@dataclass(frozen=True)
class PlannerParams:
    step_size: float = 0.3
    max_iterations: int = 10000
    resolution: float = 0.05
    seed: int = 0
    # stop and report failure once this many checks are spent; 0 disables
    max_checks: int = 0

    def __post_init__(self):
        if not self.step_size > 0:
            raise InvalidArgumentError("step_size must be positive")
        if not self.max_iterations > 0:
            raise InvalidArgumentError("max_iterations must be positive")
        if not self.resolution > 0:
            raise InvalidArgumentError("resolution must be positive")

    def with_seed(self, seed: int) -> "PlannerParams":
        return PlannerParams(self.step_size, self.max_iterations, self.resolution, int(seed),
                             self.max_checks)

    def with_budget(self, max_checks: int) -> "PlannerParams":
        return PlannerParams(self.step_size, self.max_iterations, self.resolution, self.seed,
                             int(max_checks))


@dataclass(frozen=True)
class JointBounds:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != hi.shape or np.any(lo > hi):
            raise InvalidArgumentError(f"invalid joint bounds {lo} / {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def full(cls, model: RobotModel) -> "JointBounds":
        return cls(model.lo, model.hi)

    def contains(self, q, tol: float = BOUND_TOL) -> bool:
        q = np.asarray(q, dtype=float)
        return bool(np.all(q >= self.lo - tol) and np.all(q <= self.hi + tol))


@dataclass
class PlanResult:
    success: bool
    path: list
    cost_checks: int
    iterations_used: int
    seed: int
    wall_seconds: float | None = None
    tree_nodes: int = 0

    def __eq__(self, other):
        if not isinstance(other, PlanResult):
            return NotImplemented
        return (self.success == other.success and self.cost_checks == other.cost_checks
                and self.iterations_used == other.iterations_used and self.seed == other.seed
                and len(self.path) == len(other.path)
                and all(np.array_equal(a, b) for a, b in zip(self.path, other.path)))


def rrt_connect(model: RobotModel, world: World, start, goal, bounds: JointBounds | None = None,
                params: PlannerParams = PlannerParams(), timed: bool = False) -> PlanResult:
    """Plan ``start -> goal`` with RRT-Connect, sampling uniformly inside ``bounds``.

    ``cost_checks`` counts every configuration collision check, including the
    validation of the two endpoints. Raises :class:`InvalidRequestError` when an
    endpoint is out of bounds or in collision; planning failures come back as
    ``success=False``.
    """
    t0 = time.perf_counter() if timed else None
    bounds = JointBounds.full(model) if bounds is None else bounds
    start = np.ascontiguousarray(start, dtype=float)
    goal = np.ascontiguousarray(goal, dtype=float)
    if start.shape != (model.n,) or goal.shape != (model.n,):
        raise InvalidRequestError(f"endpoints must have {model.n} joints")
    if not (bounds.contains(start) and bounds.contains(goal)):
        raise InvalidRequestError("start or goal lies outside the planning bounds")

    links = np.asarray(model.link_lengths)
    obs = world.array
    checks = 2
    if _kernels.config_collides(start, links, model.link_radius, obs):
        raise InvalidRequestError("start configuration is in collision")
    if _kernels.config_collides(goal, links, model.link_radius, obs):
        raise InvalidRequestError("goal configuration is in collision")
    if np.array_equal(start, goal):
        return PlanResult(True, [start.copy()], checks, 0, params.seed,
                          time.perf_counter() - t0 if timed else None, 1)

    ok, path, checks, iters, nodes = _kernels.rrt_connect_core(
        start, goal, np.random.default_rng(params.seed), np.asarray(bounds.lo, dtype=float),
        np.asarray(bounds.hi, dtype=float), params.max_iterations, links, model.link_radius, obs, params.step_size,
        params.resolution, params.max_checks, checks)
    return PlanResult(bool(ok), [p for p in path], int(checks), int(iters), params.seed,
                      time.perf_counter() - t0 if timed else None, int(nodes))


def path_valid(model: RobotModel, world: World, path, resolution: float) -> bool:
    if len(path) == 0:
        return False
    if len(path) == 1:
        return edge_valid(model, world, path[0], path[0], resolution)[0]
    return all(edge_valid(model, world, a, b, resolution)[0] for a, b in zip(path[:-1], path[1:]))


def path_length(path) -> float:
    """Sum of Euclidean joint-space distances between consecutive waypoints."""
    if len(path) == 0:
        raise InvalidArgumentError("path_length needs at least one waypoint")
    arr = np.asarray(path, dtype=float)
    return float(np.sum(np.linalg.norm(np.diff(arr, axis=0), axis=1)))


def shortcut(model: RobotModel, world: World, path, iterations: int = 100, seed: int = 0,
             resolution: float = 0.05) -> list:
    """Randomly splice out vertices whenever the direct segment is collision-free.

    Endpoints are kept; length never increases (triangle inequality).
    """
    if not path_valid(model, world, path, resolution):
        raise InvalidArgumentError("shortcut needs a valid input path")
    rng = np.random.default_rng(seed)
    out = [np.asarray(p, dtype=float) for p in path]
    for _ in range(iterations):
        if len(out) < 3:
            break
        i, j = sorted(rng.choice(len(out), size=2, replace=False))
        if j - i < 2:
            continue
        if edge_valid(model, world, out[i], out[j], resolution)[0]:
            out = out[: i + 1] + out[j:]
    return out


def shape_range(start, subgoal, paddings, joint_lo, joint_hi) -> JointBounds:
    """Padded bounding box of start and subgoal, clamped to the joint limits."""
    start = np.asarray(start, dtype=float)
    subgoal = np.asarray(subgoal, dtype=float)
    paddings = np.asarray(paddings, dtype=float)
    if np.any(paddings < 0):
        raise InvalidArgumentError("paddings must be nonnegative")
    lo = np.maximum(np.minimum(start, subgoal) - paddings, joint_lo)
    hi = np.minimum(np.maximum(start, subgoal) + paddings, joint_hi)
    return JointBounds(lo, hi)


def default_paddings(n: int, base: float = 3.0, distal: float = 1.0) -> np.ndarray:
    """Linearly decreasing paddings from the base joint to the distal joint."""
    return np.linspace(base, distal, n)
