"""Planar serial-chain robot model, forward kinematics and the configuration features.

All functions accept a single configuration of shape ``(n,)`` or a batch of
shape ``(B, n)`` and keep the leading batch axis in their output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class RobotModel:
    link_lengths: tuple
    link_radius: float = 0.05
    joint_lo: tuple = None
    joint_hi: tuple = None

    def __post_init__(self):
        links = tuple(float(v) for v in self.link_lengths)
        object.__setattr__(self, "link_lengths", links)
        n = len(links)
        if n < 2:
            raise InvalidArgumentError(f"a robot needs at least 2 joints, got {n}")
        if any(not (v > 0.0) for v in links):
            raise InvalidArgumentError(f"link lengths must be positive: {links}")
        if not self.link_radius >= 0.0:
            raise InvalidArgumentError(f"link_radius must be nonnegative: {self.link_radius}")
        lo = (-TWO_PI,) * n if self.joint_lo is None else tuple(float(v) for v in self.joint_lo)
        hi = (TWO_PI,) * n if self.joint_hi is None else tuple(float(v) for v in self.joint_hi)
        if len(lo) != n or len(hi) != n:
            raise InvalidArgumentError("joint limits must have one entry per link")
        if any(a >= b for a, b in zip(lo, hi)):
            raise InvalidArgumentError(f"joint_lo must be below joint_hi: {lo} vs {hi}")
        object.__setattr__(self, "joint_lo", lo)
        object.__setattr__(self, "joint_hi", hi)

    @property
    def n(self) -> int:
        return len(self.link_lengths)

    @property
    def reach(self) -> float:
        return float(sum(self.link_lengths))

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.joint_lo)

    @property
    def hi(self) -> np.ndarray:
        return np.asarray(self.joint_hi)

    def within_limits(self, q, tol: float = 0.0) -> bool:
        q = np.asarray(q, dtype=float)
        return bool(np.all(q >= self.lo - tol) and np.all(q <= self.hi + tol))

    def clamp(self, q) -> np.ndarray:
        return np.clip(np.asarray(q, dtype=float), self.lo, self.hi)

    def to_dict(self) -> dict:
        return {
            "links": list(self.link_lengths),
            "link_radius": self.link_radius,
            "joint_lo": list(self.joint_lo),
            "joint_hi": list(self.joint_hi),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RobotModel":
        return cls(d["links"], d["link_radius"], d.get("joint_lo"), d.get("joint_hi"))


@dataclass(frozen=True)
class FeatureParams:
    """Weighting between the kinematic and the joint-space feature terms."""

    alpha: float = 0.5
    levels: int = 2

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidArgumentError(f"alpha must lie in [0, 1], got {self.alpha}")
        if int(self.levels) != self.levels or self.levels < 0:
            raise InvalidArgumentError(f"levels must be a nonnegative integer, got {self.levels}")


def _as_configs(model: RobotModel, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape[-1:] != (model.n,) or q.ndim > 2:
        raise InvalidArgumentError(f"expected configuration(s) with {model.n} joints, got shape {q.shape}")
    if not np.all(np.isfinite(q)):
        raise InvalidArgumentError("configuration contains non-finite values")
    return q


def forward_kinematics(model: RobotModel, q) -> np.ndarray:
    """Base point followed by every link endpoint.

    Returns an array of shape ``(n + 1, 2)`` (or ``(B, n + 1, 2)`` for a batch).
    Joint angles accumulate along the chain; the base sits at the origin.
    """
    q = _as_configs(model, q)
    phi = np.cumsum(q, axis=-1)
    links = np.asarray(model.link_lengths)
    steps = np.stack([links * np.cos(phi), links * np.sin(phi)], axis=-1)
    pts = np.cumsum(steps, axis=-2)
    zero = np.zeros(pts.shape[:-2] + (1, 2))
    return np.concatenate([zero, pts], axis=-2)


def positional_encode(q, levels: int) -> np.ndarray:
    """``[q, cos q, sin q, cos 2q, sin 2q, ..., cos 2^l q, sin 2^l q]``.

    The raw angles come first; they are what separates ``q`` from ``q + 2*pi``.
    """
    if levels < 0:
        raise InvalidArgumentError(f"levels must be >= 0, got {levels}")
    q = np.asarray(q, dtype=float)
    parts = [q]
    for k in range(levels + 1):
        fq = (2.0 ** k) * q
        parts.append(np.cos(fq))
        parts.append(np.sin(fq))
    return np.concatenate(parts, axis=-1)


def encoding_dim(n: int, levels: int) -> int:
    return n * (2 * (levels + 1) + 1)


def feature_distance_sq(x, x_hat, model: RobotModel, params: FeatureParams):
    """``alpha * |FK(x) - FK(x_hat)|^2 + (1 - alpha) * |enc(x) - enc(x_hat)|^2``.

    Batched inputs give one value per row.
    """
    x = _as_configs(model, x)
    x_hat = _as_configs(model, x_hat)
    if x.shape != x_hat.shape:
        raise InvalidArgumentError(f"shape mismatch {x.shape} vs {x_hat.shape}")
    dfk = forward_kinematics(model, x) - forward_kinematics(model, x_hat)
    denc = positional_encode(x, params.levels) - positional_encode(x_hat, params.levels)
    fk_term = np.sum(dfk * dfk, axis=(-2, -1))
    enc_term = np.sum(denc * denc, axis=-1)
    out = params.alpha * fk_term + (1.0 - params.alpha) * enc_term
    return float(out) if out.ndim == 0 else out


def feature_distance_sq_grad(x, x_hat, model: RobotModel, params: FeatureParams):
    """Value and gradient of :func:`feature_distance_sq` with respect to ``x_hat``.

    Both inputs are batches ``(B, n)``; returns ``(values (B,), grad (B, n))``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    x_hat = np.atleast_2d(np.asarray(x_hat, dtype=float))
    links = np.asarray(model.link_lengths)
    alpha = params.alpha

    phi_hat = np.cumsum(x_hat, axis=-1)
    pts_hat = np.cumsum(np.stack([links * np.cos(phi_hat), links * np.sin(phi_hat)], -1), axis=-2)
    phi = np.cumsum(x, axis=-1)
    pts = np.cumsum(np.stack([links * np.cos(phi), links * np.sin(phi)], -1), axis=-2)
    diff = pts_hat - pts  # (B, n, 2), base point omitted since it never moves
    fk_val = np.sum(diff * diff, axis=(-2, -1))
    # endpoint k depends on link i < k through that link's tangent, and link i on joints j <= i
    tail = np.flip(np.cumsum(np.flip(diff, axis=-2), axis=-2), axis=-2)
    tangent = np.stack([-links * np.sin(phi_hat), links * np.cos(phi_hat)], -1)
    per_link = np.sum(tangent * tail, axis=-1)
    fk_grad = 2.0 * np.flip(np.cumsum(np.flip(per_link, axis=-1), axis=-1), axis=-1)

    raw = x_hat - x
    enc_val = np.sum(raw * raw, axis=-1)
    enc_grad = 2.0 * raw
    for k in range(params.levels + 1):
        f = 2.0 ** k
        ch, sh = np.cos(f * x_hat), np.sin(f * x_hat)
        dc = ch - np.cos(f * x)
        ds = sh - np.sin(f * x)
        enc_val = enc_val + np.sum(dc * dc + ds * ds, axis=-1)
        enc_grad = enc_grad + 2.0 * f * (-dc * sh + ds * ch)

    value = alpha * fk_val + (1.0 - alpha) * enc_val
    grad = alpha * fk_grad + (1.0 - alpha) * enc_grad
    return value, grad
