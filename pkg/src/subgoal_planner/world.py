"""Circular-obstacle worlds, collision checks, condition encoding and moving obstacles."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import CapacityError, InvalidArgumentError
from .kinematics import RobotModel, forward_kinematics

K_MAX = 8
EMPTY_SLOT = (0.0, 0.0, -1.0)
DEFAULT_BOUNDS = (-3.0, -3.0, 3.0, 3.0)


@dataclass(frozen=True)
class Obstacle:
    center: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0.0:
            raise InvalidArgumentError(f"obstacle radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class World:
    """Static obstacles inside an axis-aligned box ``(xmin, ymin, xmax, ymax)``."""

    obstacles: tuple = ()
    bounds: tuple = DEFAULT_BOUNDS
    k_max: int = K_MAX
    name: str = "world"

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        object.__setattr__(self, "bounds", tuple(float(b) for b in self.bounds))
        if len(self.obstacles) > self.k_max:
            raise CapacityError(
                f"{self.name}: {len(self.obstacles)} obstacles exceed capacity {self.k_max}")
        xmin, ymin, xmax, ymax = self.bounds
        for ob in self.obstacles:
            cx, cy = ob.center
            if not (xmin <= cx <= xmax and ymin <= cy <= ymax):
                raise InvalidArgumentError(f"{self.name}: obstacle center {ob.center} outside bounds")

    @property
    def array(self) -> np.ndarray:
        # cached on first use; the dataclass is frozen so this never goes stale
        arr = self.__dict__.get("_array")
        if arr is None:
            arr = np.array([[o.center[0], o.center[1], o.radius] for o in self.obstacles],
                           dtype=float).reshape(-1, 3)
            object.__setattr__(self, "_array", arr)
        return arr

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "bounds": list(self.bounds),
            "obstacles": [{"cx": o.center[0], "cy": o.center[1], "r": o.radius}
                          for o in self.obstacles],
        }

    @classmethod
    def from_dict(cls, d: dict, k_max: int = K_MAX) -> "World":
        obstacles = [Obstacle((o["cx"], o["cy"]), o["r"]) for o in d.get("obstacles", [])]
        return cls(obstacles, d.get("bounds", DEFAULT_BOUNDS), k_max, d.get("name", "world"))


@dataclass(frozen=True)
class MovingObstacle:
    """Disk following a piecewise-linear schedule of ``(time, (x, y))`` points."""

    schedule: tuple
    radius: float
    times: np.ndarray = field(init=False, repr=False, compare=False)
    points: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        sched = tuple((float(t), (float(p[0]), float(p[1]))) for t, p in self.schedule)
        if not sched:
            raise InvalidArgumentError("a moving obstacle needs at least one schedule point")
        times = np.array([s[0] for s in sched])
        if np.any(np.diff(times) <= 0.0):
            raise InvalidArgumentError("schedule times must be strictly increasing")
        if not self.radius > 0.0:
            raise InvalidArgumentError("mover radius must be positive")
        object.__setattr__(self, "schedule", sched)
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "points", np.array([s[1] for s in sched]))

    def position(self, t: float) -> tuple:
        x = np.interp(t, self.times, self.points[:, 0])
        y = np.interp(t, self.times, self.points[:, 1])
        return float(x), float(y)

    def max_speed(self) -> float:
        if len(self.times) < 2:
            return 0.0
        seg = np.linalg.norm(np.diff(self.points, axis=0), axis=1)
        return float(np.max(seg / np.diff(self.times)))

    def to_dict(self) -> dict:
        return {"r": self.radius, "schedule": [[t, p[0], p[1]] for t, p in self.schedule]}

    @classmethod
    def from_dict(cls, d: dict) -> "MovingObstacle":
        return cls([(row[0], (row[1], row[2])) for row in d["schedule"]], d["r"])


def config_in_collision(model: RobotModel, world: World, q) -> bool:
    """True iff some link segment comes closer to an obstacle center than
    ``obstacle.radius + link_radius``."""
    obs = world.array
    if len(obs) == 0:
        return False
    pts = forward_kinematics(model, q)
    a, b = pts[:-1], pts[1:]
    ab = b - a
    c = obs[:, :2]
    # (links, obstacles) projection parameters onto each segment
    t = np.einsum("lkd,ld->lk", c[None, :, :] - a[:, None, :], ab) / np.sum(ab * ab, axis=1)[:, None]
    t = np.clip(t, 0.0, 1.0)
    closest = a[:, None, :] + t[..., None] * ab[:, None, :]
    dist = np.linalg.norm(closest - c[None, :, :], axis=-1)
    return bool(np.any(dist < obs[None, :, 2] + model.link_radius))


def edge_valid(model: RobotModel, world: World, q1, q2, resolution: float) -> tuple[bool, int]:
    """Check the straight joint-space segment ``q1 -> q2`` at the given resolution.

    The segment is split into ``ceil(max|q2 - q1| / resolution)`` equal steps and
    every state, both endpoints included, is checked in order until the first
    collision. Returns ``(valid, checks_performed)``.
    """
    if not resolution > 0.0:
        raise InvalidArgumentError(f"resolution must be positive, got {resolution}")
    q1 = np.ascontiguousarray(q1, dtype=float)
    q2 = np.ascontiguousarray(q2, dtype=float)
    ok, checks = _kernels.edge_check(q1, q2, np.asarray(model.link_lengths), model.link_radius,
                                     world.array, resolution)
    return bool(ok), int(checks)


def encode_world(world: World, k_max: int = K_MAX) -> np.ndarray:
    """Pack obstacles as ``(cx, cy, r)`` slots in insertion order; empty slots are ``(0, 0, -1)``."""
    if len(world.obstacles) > k_max:
        raise CapacityError(f"{world.name}: {len(world.obstacles)} obstacles exceed capacity {k_max}")
    out = np.tile(np.array(EMPTY_SLOT), k_max)
    for i, ob in enumerate(world.obstacles):
        out[3 * i: 3 * i + 3] = (ob.center[0], ob.center[1], ob.radius)
    return out


def decode_world(vec, bounds=DEFAULT_BOUNDS, k_max: int = K_MAX) -> World:
    slots = np.asarray(vec, dtype=float).reshape(-1, 3)
    obstacles = [Obstacle((cx, cy), r) for cx, cy, r in slots if r > 0.0]
    return World(obstacles, bounds, k_max)


def snapshot(static: World, movers, t: float, inflate: float = 0.0) -> World:
    """The static world plus every mover frozen at its position at time ``t``.

    ``inflate`` grows each mover's radius, which planners use as a safety margin
    for the mover's motion over a planning horizon.
    """
    if t < 0.0:
        raise InvalidArgumentError(f"snapshot time must be >= 0, got {t}")
    extra = [Obstacle(m.position(t), m.radius + inflate) for m in movers]
    return World(tuple(static.obstacles) + tuple(extra), static.bounds, static.k_max,
                 f"{static.name}@{t:.3f}")


def load_world_file(path) -> tuple[World, list]:
    """Read ``{bounds, obstacles: [{cx, cy, r}], movers: [{r, schedule: [[t, cx, cy], ...]}]}``."""
    path = Path(path)
    d = json.loads(path.read_text())
    d.setdefault("name", path.stem)
    movers = [MovingObstacle.from_dict(m) for m in d.get("movers", [])]
    return World.from_dict(d, d.get("k_max", K_MAX)), movers


def save_world_file(path, world: World, movers=()) -> None:
    d = world.to_dict()
    d["movers"] = [m.to_dict() for m in movers]
    Path(path).write_text(json.dumps(d, indent=1) + "\n")


def random_world(rng: np.random.Generator, name: str, count_range=(4, 8), radius_range=(0.2, 0.4),
                 ring=(0.7, 2.8), bounds=DEFAULT_BOUNDS, k_max: int = K_MAX) -> World:
    """Scatter disks with centers uniform in angle and distance ``ring`` from the robot base.

    Obstacles are stored in order of polar angle so that similar layouts get
    similar slot encodings.
    """
    count = int(rng.integers(count_range[0], count_range[1] + 1))
    if count > k_max:
        raise CapacityError(f"{name}: requested {count} obstacles, capacity is {k_max}")
    obstacles = []
    for _ in range(count):
        dist = rng.uniform(*ring)
        angle = rng.uniform(-math.pi, math.pi)
        center = (dist * math.cos(angle), dist * math.sin(angle))
        obstacles.append(Obstacle(center, rng.uniform(*radius_range)))
    obstacles.sort(key=lambda o: math.atan2(o.center[1], o.center[0]))
    return World(tuple(obstacles), bounds, k_max, name)
