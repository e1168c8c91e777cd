"""Static ablation runs (subgoal and goal-reaching) and the moving-obstacle replanning loop."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cvae import CvaeModel, generate_candidates
from .errors import InvalidArgumentError, ModelMissingError, SelectionFailure
from .kinematics import RobotModel
from .planner import (JointBounds, PlannerParams, PlanResult, path_length, path_valid, rrt_connect,
                      shape_range)
from .selection import (BASELINE, BEST_EFFORT, GOAL_ORIENTED, RANDOM, SelectionBudget,
                        parse_variant, score_candidates, select_best_effort, select_goal_oriented,
                        select_random)
from .world import World, config_in_collision, load_world_file, save_world_file, snapshot

log = logging.getLogger(__name__)

# seed stream tags
_CAND, _SELECT, _PLAN, _GOALTEST, _DYNAMIC = 0, 1, 2, 3, 4


@dataclass
class Models:
    cvae: CvaeModel | None = None
    estimators: dict = field(default_factory=dict)

    def estimator(self, family):
        if family not in self.estimators:
            raise ModelMissingError(f"no {family} time estimator loaded")
        return self.estimators[family]


@dataclass
class EvalSettings:
    robot: RobotModel
    planner: PlannerParams
    paddings: np.ndarray
    budget: SelectionBudget
    batch: int = 32
    runs_per_plan: int = 30
    max_trials: int = 10
    repeats: int = 10
    goal_epsilon: float = 1e-6

    @classmethod
    def from_config(cls, cfg) -> "EvalSettings":
        return cls(cfg.robot(), cfg.planner_params(), cfg.paddings(), cfg.budget(), cfg["cvae.batch"],
                   cfg["eval.runs_per_plan"], cfg["eval.max_trials"], cfg["eval.repeats"],
                   cfg["eval.goal_epsilon"])


@dataclass
class EvalRow:
    variant: str
    problem_id: str
    seed: int
    success: bool
    subgoal_costs: list
    total_cost: int
    path_length: float
    subgoal_count: int

    def __post_init__(self):
        self.subgoal_costs = [int(c) for c in self.subgoal_costs]
        if self.total_cost != sum(self.subgoal_costs):
            raise InvalidArgumentError("total_cost must equal the sum of subgoal costs")


def _seed(master: int, *key) -> int:
    ss = np.random.SeedSequence(entropy=master, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def _rng(master: int, *key) -> np.random.Generator:
    return np.random.default_rng(_seed(master, *key))


def is_hard(robot: RobotModel, problem, params: PlannerParams, runs: int, threshold: float,
            seed: int = 0) -> bool:
    """True when every seeded direct start-to-goal run costs more than ``threshold`` checks."""
    for k in range(runs):
        res = rrt_connect(robot, problem.world, problem.start, problem.goal,
                          params=params.with_seed(_seed(seed, k)))
        if not res.success or res.cost_checks <= threshold:
            return False
    return True


def hard_subset(robot: RobotModel, problems, params: PlannerParams, runs: int = 30,
                threshold: float = 1000.0, seed: int = 0) -> list:
    return [p for p in problems if is_hard(robot, p, params, runs, threshold, seed)]


def choose_subgoal(models: Models, settings: EvalSettings, world: World, current, goal,
                   policy: str, family: str | None, cand_rng, select_rng):
    """Generate one candidate batch and pick a subgoal; raises SelectionFailure if all collide."""
    cands = generate_candidates(models.cvae, world, current, goal, settings.batch, cand_rng)
    if policy == RANDOM:
        flags = [config_in_collision(settings.robot, world, c) for c in cands]
        free = [i for i, f in enumerate(flags) if not f]
        if not free:
            raise SelectionFailure("every candidate is in collision")
        return cands[free[int(select_rng.integers(len(free)))]]
    scored = score_candidates(settings.robot, current, goal, world, cands, models.estimator(family),
                              settings.budget.confidence)
    if policy == BEST_EFFORT:
        return scored[select_best_effort(scored, settings.budget, select_rng)].config
    if policy == GOAL_ORIENTED:
        return scored[select_goal_oriented(scored, settings.budget)].config
    raise InvalidArgumentError(f"unknown policy {policy!r}")


def plan_leg(settings: EvalSettings, world: World, current, target, shaping: bool, seed: int,
             max_checks: int = 0) -> PlanResult:
    if shaping:
        bounds = shape_range(current, target, settings.paddings, settings.robot.lo, settings.robot.hi)
    else:
        bounds = JointBounds.full(settings.robot)
    params = settings.planner.with_seed(seed).with_budget(max_checks)
    return rrt_connect(settings.robot, world, current, target, bounds, params)


def eval_subgoal(problems, models: Models, variant: str, settings: EvalSettings, seed: int = 0) -> list:
    """Plan from the start to one selected subgoal, ``runs_per_plan`` times per problem.

    Candidate draws, selections and planner seeds depend only on ``seed`` and the
    problem index, so variants are evaluated on matched randomness.
    """
    policy, family, shaping = parse_variant(variant)
    rows = []
    for i, prob in enumerate(problems):
        if policy == BASELINE:
            target = prob.goal
        else:
            try:
                target = choose_subgoal(models, settings, prob.world, prob.start, prob.goal, policy,
                                        family, _rng(seed, i, _CAND), _rng(seed, i, _SELECT))
            except SelectionFailure:
                rows.append(EvalRow(variant, prob.id, seed, False, [], 0, 0.0, 0))
                continue
        for k in range(settings.runs_per_plan):
            res = plan_leg(settings, prob.world, prob.start, target, shaping, _seed(seed, i, _PLAN, k))
            length = path_length(res.path) if res.success else 0.0
            rows.append(EvalRow(variant, prob.id, seed, res.success, [res.cost_checks], res.cost_checks,
                                length, 1))
    return rows


def _goal_test(settings: EvalSettings, world: World, current, goal, epsilon, seed):
    if not epsilon > 0:
        raise InvalidArgumentError("epsilon must be positive")
    if np.linalg.norm(np.asarray(goal) - np.asarray(current)) <= epsilon:
        return True, None
    res = plan_leg(settings, world, current, goal, False, seed, int(settings.budget.t_d))
    return bool(res.success and res.cost_checks <= settings.budget.t_d), res


def subgoal_reached_goal_test(settings: EvalSettings, world: World, current, goal,
                              epsilon: float | None = None, seed: int = 0):
    """``(reached, final_leg)``: reached when within ``epsilon`` or a direct plan fits the budget.

    ``final_leg`` is the successful direct plan, or ``None`` when the configurations
    already coincide within ``epsilon`` or the test fails.
    """
    epsilon = settings.goal_epsilon if epsilon is None else epsilon
    reached, res = _goal_test(settings, world, current, goal, epsilon, seed)
    return reached, (res if reached else None)


def reach_goal(prob, models: Models, variant: str, settings: EvalSettings, seed: int,
               index: int, repeat: int) -> EvalRow:
    """Chain subgoals until the goal test passes or ``max_trials`` generation trials are used."""
    policy, family, shaping = parse_variant(variant)
    world = prob.world
    current = np.asarray(prob.start, dtype=float)
    costs, path = [], [current]
    trials = 0
    subgoals = 0
    while True:
        reached, leg = subgoal_reached_goal_test(settings, world, current, prob.goal,
                                                 seed=_seed(seed, index, repeat, trials, _GOALTEST))
        if reached:
            if leg is not None:
                costs.append(leg.cost_checks)
                path += leg.path[1:]
            return EvalRow(variant, prob.id, seed, True, costs, sum(costs), path_length(path), subgoals)
        if trials >= settings.max_trials:
            return EvalRow(variant, prob.id, seed, False, costs, sum(costs), path_length(path), subgoals)
        trials += 1
        try:
            sub = choose_subgoal(models, settings, world, current, prob.goal, policy, family,
                                 _rng(seed, index, repeat, trials, _CAND),
                                 _rng(seed, index, repeat, trials, _SELECT))
        except SelectionFailure:
            continue
        res = plan_leg(settings, world, current, sub, shaping, _seed(seed, index, repeat, trials, _PLAN))
        if not res.success:
            continue
        costs.append(res.cost_checks)
        path += res.path[1:]
        subgoals += 1
        current = np.asarray(sub, dtype=float)


def eval_goal_reaching(problems, models: Models, variant: str, settings: EvalSettings,
                       seed: int = 0) -> list:
    policy, _, _ = parse_variant(variant)
    rows = []
    for i, prob in enumerate(problems):
        for r in range(settings.repeats):
            if policy == BASELINE:
                res = rrt_connect(settings.robot, prob.world, prob.start, prob.goal,
                                  params=settings.planner.with_seed(_seed(seed, i, r, _PLAN)))
                length = path_length(res.path) if res.success else 0.0
                rows.append(EvalRow(variant, prob.id, seed, res.success, [res.cost_checks],
                                    res.cost_checks, length, 0))
            else:
                rows.append(reach_goal(prob, models, variant, settings, seed, i, r))
    return rows


def eval_static(problems, models: Models, variant: str, settings: EvalSettings, seed: int = 0,
                mode: str = "subgoal"):
    """Rows plus summary for one variant; ``mode`` is ``subgoal`` or ``goal``."""
    if mode == "subgoal":
        rows = eval_subgoal(problems, models, variant, settings, seed)
    elif mode == "goal":
        rows = eval_goal_reaching(problems, models, variant, settings, seed)
    else:
        raise InvalidArgumentError(f"unknown evaluation mode {mode!r}")
    return rows, summarize(rows, settings.budget.t_d)


def summarize(rows, t_d: float) -> dict:
    """Fractions of leg costs within 1x, 2x and 4x the budget, cost statistics, success rate."""
    costs = np.array([c for r in rows for c in r.subgoal_costs], dtype=float)
    totals = np.array([r.total_cost for r in rows if r.success], dtype=float)
    lengths = np.array([r.path_length for r in rows if r.success], dtype=float)

    def frac(k):
        return float(np.mean(costs <= k * t_d)) if len(costs) else 0.0

    return {
        "rows": len(rows),
        "success_rate": float(np.mean([r.success for r in rows])) if rows else 0.0,
        "within_1x": frac(1),
        "within_2x": frac(2),
        "within_4x": frac(4),
        "mean_cost": float(np.mean(costs)) if len(costs) else math.nan,
        "std_cost": float(np.std(costs)) if len(costs) else math.nan,
        "mean_total_cost": float(np.mean(totals)) if len(totals) else math.nan,
        "mean_path_length": float(np.mean(lengths)) if len(lengths) else math.nan,
        "mean_subgoals": float(np.mean([r.subgoal_count for r in rows])) if rows else 0.0,
    }


@dataclass
class SimSettings:
    joint_speed: float = 1.0
    cycle_seconds: float = 1.0
    dt: float = 0.05
    duration: float = 60.0
    checks_per_second: float = 20000.0

    def __post_init__(self):
        for name in ("joint_speed", "cycle_seconds", "dt", "duration", "checks_per_second"):
            if not getattr(self, name) > 0:
                raise InvalidArgumentError(f"{name} must be positive")

    @classmethod
    def from_config(cls, cfg) -> "SimSettings":
        return cls(cfg["sim.joint_speed"], cfg["sim.cycle_seconds"], cfg["sim.dt"], cfg["sim.duration"],
                   cfg["cost.checks_per_second"])


@dataclass
class TraceEntry:
    t: float
    config: np.ndarray
    subgoal: np.ndarray | None
    plan_cost: int
    snapshot_id: str
    event: str = ""  # goal-leg, subgoal-leg, goal-blocked, no-candidate or plan-failed


@dataclass
class DynamicOutcome:
    success: bool
    reason: str
    trace: list
    states: list  # executed (t, config) samples every dt
    final_time: float

    @property
    def total_cost(self) -> int:
        return sum(e.plan_cost for e in self.trace)


def _collides_at(robot: RobotModel, static: World, movers, t: float, q) -> bool:
    return config_in_collision(robot, snapshot(static, movers, t), q)


def validate_trace(robot: RobotModel, static: World, movers, states) -> bool:
    """Every executed ``(t, q)`` sample is collision-free against the movers at time ``t``."""
    return not any(_collides_at(robot, static, movers, t, q) for t, q in states)


def _safe_snapshot(robot, static, movers, t, margin, q):
    """Snapshot with the widest safety margin (full, half, quarter, none) that leaves ``q`` free.

    A mover closing in on the robot would otherwise swallow its current
    configuration and make planning impossible. Returns ``(snapshot, fraction)``;
    the snapshot is ``None`` when ``q`` already touches an obstacle.
    """
    for f in (1.0, 0.5, 0.25, 0.0):
        snap = snapshot(static, movers, t, margin * f)
        if not config_in_collision(robot, snap, q):
            return snap, f
    return None, 0.0


def _advance(path, q, distance):
    """Move ``distance`` along the polyline ``[q] + path``; returns (new config, remaining path)."""
    pts = list(path)
    cur = np.asarray(q, dtype=float)
    while pts:
        seg = np.asarray(pts[0]) - cur
        d = float(np.linalg.norm(seg))
        if d <= distance:
            distance -= d
            cur = np.asarray(pts.pop(0), dtype=float)
            continue
        return cur + seg * (distance / d), pts
    return cur, pts


def _plan_cycle(models, settings, world, current, goal, policy, family, shaping, seed):
    """One replanning step against a frozen world: ``(leg path or None, target, checks, event)``."""
    if config_in_collision(settings.robot, world, goal):
        return None, None, 1, "goal-blocked"
    reached, res = _goal_test(settings, world, current, goal, settings.goal_epsilon,
                              _seed(seed, _GOALTEST))
    spent = 0 if res is None else res.cost_checks
    if reached:
        return (res.path[1:] if res else [goal.copy()]), goal, spent, "goal-leg"
    try:
        sub = choose_subgoal(models, settings, world, current, goal, policy, family,
                             _rng(seed, _CAND), _rng(seed, _SELECT))
    except SelectionFailure:
        return None, None, spent, "no-candidate"
    res = plan_leg(settings, world, current, sub, shaping, _seed(seed, _PLAN))
    spent += res.cost_checks
    if not res.success:
        return None, np.asarray(sub, dtype=float), spent, "plan-failed"
    return res.path[1:], np.asarray(sub, dtype=float), spent, "subgoal-leg"


def eval_dynamic(problem, movers, models: Models, variant: str, settings: EvalSettings,
                 sim: SimSettings = SimSettings(), seed: int = 0) -> DynamicOutcome:
    """Replan toward ``problem.goal`` while ``movers`` sweep through ``problem.world``.

    Every cycle freezes the world at the current time, with each mover inflated by
    the distance it can cover during one cycle plus one planning budget. The
    current leg is kept while it stays valid in the new snapshot; otherwise the
    goal test runs and, failing that, a new subgoal is generated and planned.
    The robot holds still while planning (planning time is ``checks / kappa``)
    and then moves along the leg at ``sim.joint_speed`` for one cycle. A cycle
    without a usable leg waits one cycle in place. The run fails on contact with
    an obstacle, after ``max_trials`` consecutive cycles without a usable leg,
    or when ``sim.duration`` runs out.
    """
    policy, family, shaping = parse_variant(variant)
    if policy == BASELINE:
        raise InvalidArgumentError("the dynamic loop needs a subgoal policy")
    robot = settings.robot
    static = problem.world
    goal = np.asarray(problem.goal, dtype=float)
    q = np.asarray(problem.start, dtype=float)
    if _collides_at(robot, static, movers, 0.0, q):
        raise InvalidArgumentError("start is in collision at t=0")
    vmax = max((m.max_speed() for m in movers), default=0.0)
    margin = vmax * (sim.cycle_seconds + settings.budget.t_d / sim.checks_per_second)
    t = 0.0
    states = [(t, q.copy())]
    trace = []
    leg = []
    fails = 0
    cycle = 0

    def hold(until):
        nonlocal t
        while t < until - 1e-12:
            t = min(t + sim.dt, until)
            states.append((t, q.copy()))
            if _collides_at(robot, static, movers, t, q):
                return False
        return True

    while t < sim.duration:
        if np.linalg.norm(goal - q) <= settings.goal_epsilon:
            return DynamicOutcome(True, "goal reached", trace, states, t)
        snap, frac = _safe_snapshot(robot, static, movers, t, margin, q)
        if snap is None:
            return DynamicOutcome(False, "collision", trace, states, t)
        if not (leg and path_valid(robot, snap, [q] + leg, settings.planner.resolution)):
            leg, target, cost, event = _plan_cycle(models, settings, snap, q, goal, policy,
                                                    family, shaping, _seed(seed, cycle, _DYNAMIC))
            trace.append(TraceEntry(t, q.copy(), target, int(cost), snap.name, event))
            cycle += 1
            if not hold(t + cost / sim.checks_per_second):
                return DynamicOutcome(False, "collision while planning", trace, states, t)
            if leg is None:
                leg = []
                fails += 1
                if fails >= settings.max_trials:
                    return DynamicOutcome(False, "trial cap", trace, states, t)
                # nothing usable this cycle: wait for the world to change
                if not hold(min(t + sim.cycle_seconds, sim.duration)):
                    return DynamicOutcome(False, "collision while waiting", trace, states, t)
                continue
            fails = 0
            # the world moved during planning; re-validate before moving
            continue
        # a reduced margin only covers the movers for a proportionally shorter time
        end = min(t + max(sim.dt, frac * sim.cycle_seconds), sim.duration)
        while t < end - 1e-12 and leg:
            step = min(sim.dt, end - t)
            q_next, rest = _advance(leg, q, sim.joint_speed * step)
            # step guard: the next pose must clear every mover grown by one step of its motion
            if config_in_collision(robot, snapshot(static, movers, t, vmax * step), q_next):
                leg = []
                break
            q, leg = q_next, rest
            t += step
            states.append((t, q.copy()))
            if _collides_at(robot, static, movers, t, q):
                return DynamicOutcome(False, "collision", trace, states, t)
        if not leg and t < end - 1e-12 and np.linalg.norm(goal - q) > settings.goal_epsilon:
            # subgoal reached early or the step guard tripped: replan right away
            continue
    return DynamicOutcome(np.linalg.norm(goal - q) <= settings.goal_epsilon,
                          "goal reached" if np.linalg.norm(goal - q) <= settings.goal_epsilon
                          else "timeout", trace, states, t)


def load_scenario(path):
    """A world file with ``start`` and ``goal`` keys: returns ``(problem, movers)``."""
    from .dataset import PlanningProblem

    path = Path(path)
    world, movers = load_world_file(path)
    d = json.loads(path.read_text())
    if "start" not in d or "goal" not in d:
        raise InvalidArgumentError(f"scenario {path} needs start and goal configurations")
    return PlanningProblem(world.name, world, np.array(d["start"], dtype=float),
                           np.array(d["goal"], dtype=float)), movers


def desk_scenario():
    """The bundled scenario: a disk crossing above the arm while it swings from right to left."""
    return load_scenario(Path(__file__).with_name("data") / "desk_scenario.json")


def save_scenario(path, problem, movers=()) -> None:
    save_world_file(path, problem.world, movers)
    d = json.loads(Path(path).read_text())
    d["start"] = np.asarray(problem.start).tolist()
    d["goal"] = np.asarray(problem.goal).tolist()
    Path(path).write_text(json.dumps(d, indent=1) + "\n")
