"""Planning-problem generation, waypoint cost labeling, filtering and JSON-lines persistence.

Record schema (one JSON object per line)::

    {"problem_id": str, "world": {name, bounds, obstacles: [{cx, cy, r}]},
     "start": [n floats], "goal": [n floats], "waypoint": [n floats],
     "from_start_costs": [N ints], "from_goal_costs": [N ints],
     "theta_normal": {family, mu, sigma}, "theta_lognormal": {...},
     "goal_theta_normal": {...}, "goal_theta_lognormal": {...}}

Costs are collision-check counts. ``theta_*`` are fitted to ``from_start_costs``
and ``goal_theta_*`` to ``from_goal_costs``.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .distributions import LOGNORMAL, NORMAL, DistParams, empirical_percentile, fit_empirical
from .errors import DatasetParseError, GenerationError, InvalidArgumentError
from .kinematics import RobotModel
from .planner import PlannerParams, path_length, rrt_connect, shortcut
from .world import World, config_in_collision

log = logging.getLogger(__name__)


@dataclass(eq=False)
class PlanningProblem:
    id: str
    world: World
    start: np.ndarray
    goal: np.ndarray
    witness: list = field(default_factory=list)
    seed: int = 0

    def to_dict(self) -> dict:
        return {"id": self.id, "seed": self.seed, "world": self.world.to_dict(),
                "start": np.asarray(self.start).tolist(), "goal": np.asarray(self.goal).tolist(),
                "witness": [np.asarray(p).tolist() for p in self.witness]}

    @classmethod
    def from_dict(cls, d: dict, worlds: dict | None = None) -> "PlanningProblem":
        return cls(d["id"], _shared_world(d["world"], worlds), np.array(d["start"], dtype=float),
                   np.array(d["goal"], dtype=float),
                   [np.array(p, dtype=float) for p in d.get("witness", [])], int(d.get("seed", 0)))

    def __eq__(self, other):
        if not isinstance(other, PlanningProblem):
            return NotImplemented
        return (self.id == other.id and self.seed == other.seed and self.world == other.world
                and np.array_equal(self.start, other.start) and np.array_equal(self.goal, other.goal)
                and len(self.witness) == len(other.witness)
                and all(np.array_equal(a, b) for a, b in zip(self.witness, other.witness)))


@dataclass(eq=False)
class WaypointRecord:
    problem_id: str
    world: World
    start: np.ndarray
    goal: np.ndarray
    waypoint: np.ndarray
    from_start_costs: list
    from_goal_costs: list
    theta_normal: DistParams
    theta_lognormal: DistParams
    goal_theta_normal: DistParams
    goal_theta_lognormal: DistParams

    @classmethod
    def from_costs(cls, problem_id, world, start, goal, waypoint, from_start, from_goal):
        from_start = [int(c) for c in from_start]
        from_goal = [int(c) for c in from_goal]
        return cls(problem_id, world, np.asarray(start, dtype=float), np.asarray(goal, dtype=float),
                   np.asarray(waypoint, dtype=float), from_start, from_goal,
                   fit_empirical(from_start, NORMAL), fit_empirical(from_start, LOGNORMAL),
                   fit_empirical(from_goal, NORMAL), fit_empirical(from_goal, LOGNORMAL))

    def to_dict(self) -> dict:
        return {
            "problem_id": self.problem_id,
            "world": self.world.to_dict(),
            "start": self.start.tolist(),
            "goal": self.goal.tolist(),
            "waypoint": self.waypoint.tolist(),
            "from_start_costs": list(self.from_start_costs),
            "from_goal_costs": list(self.from_goal_costs),
            "theta_normal": self.theta_normal.to_dict(),
            "theta_lognormal": self.theta_lognormal.to_dict(),
            "goal_theta_normal": self.goal_theta_normal.to_dict(),
            "goal_theta_lognormal": self.goal_theta_lognormal.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict, worlds: dict | None = None) -> "WaypointRecord":
        costs_s = [int(c) for c in d["from_start_costs"]]
        costs_g = [int(c) for c in d["from_goal_costs"]]
        if len(costs_s) < 2 or len(costs_g) < 2 or min(costs_s + costs_g) < 1:
            raise InvalidArgumentError("records need at least 2 positive costs per direction")
        return cls(d["problem_id"], _shared_world(d["world"], worlds),
                   np.array(d["start"], dtype=float), np.array(d["goal"], dtype=float),
                   np.array(d["waypoint"], dtype=float), costs_s, costs_g,
                   DistParams.from_dict(d["theta_normal"]), DistParams.from_dict(d["theta_lognormal"]),
                   DistParams.from_dict(d["goal_theta_normal"]),
                   DistParams.from_dict(d["goal_theta_lognormal"]))

    def __eq__(self, other):
        if not isinstance(other, WaypointRecord):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def _shared_world(d: dict, cache: dict | None) -> World:
    # records of one problem share a World instance after loading
    if cache is None:
        return World.from_dict(d)
    key = json.dumps(d, sort_keys=True)
    if key not in cache:
        cache[key] = World.from_dict(d)
    return cache[key]


def sample_free_config(robot: RobotModel, world: World, rng: np.random.Generator,
                       max_tries: int = 1000) -> np.ndarray:
    for _ in range(max_tries):
        q = rng.uniform(robot.lo, robot.hi)
        if not config_in_collision(robot, world, q):
            return q
    raise GenerationError(f"no collision-free configuration found in world {world.name!r} "
                          f"after {max_tries} samples")


def generate_problems(worlds, robot: RobotModel, count: int, seed: int,
                      params: PlannerParams = PlannerParams(), max_tries: int = 1000,
                      attempts_per_problem: int = 50, prefix: str = "p") -> list:
    """Random collision-free start/goal pairs whose witness plan succeeds.

    Problems cycle through ``worlds`` in order. Raises :class:`GenerationError`
    naming the world when rejection sampling or witness planning keeps failing.
    """
    if count <= 0:
        raise InvalidArgumentError("count must be positive")
    worlds = list(worlds)
    if not worlds:
        raise InvalidArgumentError("need at least one world")
    rng = np.random.default_rng(seed)
    problems = []
    for i in range(count):
        world = worlds[i % len(worlds)]
        for attempt in range(attempts_per_problem):
            start = sample_free_config(robot, world, rng, max_tries)
            goal = sample_free_config(robot, world, rng, max_tries)
            pseed = int(rng.integers(0, 2 ** 63 - 1))
            res = rrt_connect(robot, world, start, goal, params=params.with_seed(pseed))
            if res.success:
                problems.append(PlanningProblem(f"{prefix}{i:06d}", world, start, goal, res.path, pseed))
                break
        else:
            raise GenerationError(f"world {world.name!r}: no feasible problem in "
                                  f"{attempts_per_problem} attempts")
    return problems


def resample_path(path, spacing: float) -> list:
    """Points every ``spacing`` radians of arc length after the start; always ends at the goal."""
    pts = [np.asarray(p, dtype=float) for p in path]
    if len(pts) < 2:
        return []
    out = []
    next_at = spacing
    travelled = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        seg = float(np.linalg.norm(b - a))
        while seg > 0 and next_at < travelled + seg - 1e-9:
            out.append(a + (next_at - travelled) / seg * (b - a))
            next_at += spacing
        travelled += seg
    out.append(pts[-1].copy())
    return out


def _run_seeds(problem_seed: int, waypoint_index: int, direction: int, runs: int) -> list:
    ss = np.random.SeedSequence(entropy=problem_seed, spawn_key=(waypoint_index, direction))
    return [int(s) for s in ss.generate_state(runs, dtype=np.uint64) >> np.uint64(1)]


def label_waypoints(problem: PlanningProblem, robot: RobotModel, runs: int = 30,
                    params: PlannerParams = PlannerParams(), spacing: float = 1.0,
                    shortcut_iterations: int = 100, include_start: bool = False) -> list:
    """Cost-label waypoints along the problem's smoothed witness path.

    Each waypoint gets ``runs`` seeded RRT-Connect costs from the start and
    ``runs`` from the goal. Waypoints whose runs all fail in either direction
    are dropped with a warning.
    """
    if runs < 2:
        raise InvalidArgumentError("need at least 2 runs per waypoint")
    if not problem.witness:
        raise InvalidArgumentError(f"problem {problem.id} has no feasibility witness")
    world = problem.world
    smooth = shortcut(robot, world, problem.witness, shortcut_iterations, problem.seed, params.resolution)
    waypoints = resample_path(smooth, spacing)
    if include_start:
        waypoints.insert(0, np.asarray(problem.start, dtype=float).copy())
    records = []
    for k, w in enumerate(waypoints):
        if config_in_collision(robot, world, w):
            continue
        costs = []
        ok = True
        for direction, origin in enumerate((problem.start, problem.goal)):
            results = [rrt_connect(robot, world, origin, w, params=params.with_seed(s))
                       for s in _run_seeds(problem.seed, k, direction, runs)]
            if not any(r.success for r in results):
                log.warning("problem %s waypoint %d: all %d runs failed, dropping", problem.id, k, runs)
                ok = False
                break
            costs.append([r.cost_checks for r in results])
        if ok:
            records.append(WaypointRecord.from_costs(problem.id, world, problem.start, problem.goal,
                                                     w, costs[0], costs[1]))
    return records


def passes_budget(costs, budget_checks: float, mode: str = "percentile") -> bool:
    if mode == "percentile":
        return empirical_percentile(costs, 95.0) <= budget_checks
    if mode == "max":
        return max(costs) <= budget_checks
    raise InvalidArgumentError(f"unknown filter mode {mode!r}")


def filter_training_set(records, budget_checks: float, mode: str = "percentile") -> list:
    """Keep records whose start-side 95th-percentile cost (or max, with ``mode='max'``) fits the budget."""
    if not budget_checks > 0:
        raise InvalidArgumentError("budget must be positive")
    kept = [r for r in records if passes_budget(r.from_start_costs, budget_checks, mode)]
    if records and not kept:
        log.warning("no record satisfies the %s budget of %s checks", mode, budget_checks)
    return kept


def _dump_lines(items, path) -> None:
    with open(path, "w") as fh:
        for item in items:
            fh.write(json.dumps(item.to_dict()))
            fh.write("\n")


def _load_lines(path, parse) -> list:
    worlds = {}
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(parse(json.loads(line), worlds))
            except (ValueError, KeyError, TypeError) as exc:
                raise DatasetParseError(path, lineno, str(exc) or type(exc).__name__) from exc
    return out


def save_dataset(records, path) -> None:
    _dump_lines(records, path)


def load_dataset(path) -> list:
    return _load_lines(path, WaypointRecord.from_dict)


def save_problems(problems, path) -> None:
    _dump_lines(problems, path)


def load_problems(path) -> list:
    return _load_lines(path, PlanningProblem.from_dict)


def dataset_summary(records) -> dict:
    if not records:
        return {"records": 0}
    p95 = [empirical_percentile(r.from_start_costs) for r in records]
    dist = [path_length([r.start, r.waypoint]) for r in records]
    return {"records": len(records), "problems": len({r.problem_id for r in records}),
            "median_p95_checks": float(np.median(p95)),
            "median_start_distance": float(np.median(dist)),
            "mean_log_cost": float(np.mean([math.log(c) for r in records for c in r.from_start_costs]))}
