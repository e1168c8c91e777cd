"""Normal and log-normal plan-cost distributions: CDF, quantile, MLE fit and NLL."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

NORMAL = "normal"
LOGNORMAL = "lognormal"
FAMILIES = (NORMAL, LOGNORMAL)

# floors applied to degenerate (zero-variance) fits
SIGMA_MIN = {LOGNORMAL: 0.05, NORMAL: 0.5}

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class DistParams:
    """A 1-D plan-cost distribution.

    For ``lognormal``, ``mu`` and ``sigma`` describe the normal distribution of
    ``ln t``.
    """

    family: str
    mu: float
    sigma: float

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidArgumentError(f"unknown family {self.family!r}")
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma) and self.sigma > 0.0):
            raise InvalidArgumentError(f"invalid parameters mu={self.mu}, sigma={self.sigma}")
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "sigma", float(self.sigma))

    def to_dict(self) -> dict:
        return {"family": self.family, "mu": self.mu, "sigma": self.sigma}

    @classmethod
    def from_dict(cls, d: dict) -> "DistParams":
        return cls(d["family"], d["mu"], d["sigma"])

    def mean(self) -> float:
        if self.family == NORMAL:
            return self.mu
        return math.exp(self.mu + 0.5 * self.sigma ** 2)

    def median(self) -> float:
        return self.mu if self.family == NORMAL else math.exp(self.mu)


def std_normal_cdf(z: float) -> float:
    # erfc keeps full relative precision in the lower tail
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def cdf(params: DistParams, t: float) -> float:
    if not math.isfinite(t):
        if math.isnan(t):
            raise InvalidArgumentError("cdf of NaN")
        return 1.0 if t > 0 else 0.0
    if params.family == NORMAL:
        return std_normal_cdf((t - params.mu) / params.sigma)
    if t <= 0.0:
        return 0.0
    return std_normal_cdf((math.log(t) - params.mu) / params.sigma)


def std_normal_quantile(p: float) -> float:
    """Inverse of :func:`std_normal_cdf` by bisection down to adjacent floats."""
    if not 0.0 < p < 1.0:
        raise InvalidArgumentError(f"quantile level must lie in (0, 1), got {p}")
    lo, hi = -40.0, 40.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if std_normal_cdf(mid) < p:
            lo = mid
        else:
            hi = mid
    # pick whichever bracket end lands closer in probability
    return lo if abs(std_normal_cdf(lo) - p) <= abs(std_normal_cdf(hi) - p) else hi


def quantile(params: DistParams, p: float) -> float:
    z = std_normal_quantile(p)
    if params.family == NORMAL:
        return params.mu + params.sigma * z
    return math.exp(params.mu + params.sigma * z)


def t95(params: DistParams, confidence: float = 0.95) -> float:
    return quantile(params, confidence)


def fit_empirical(samples, family: str, sigma_min: float | None = None) -> DistParams:
    """Maximum-likelihood fit: sample mean and population std (of ``ln t`` for log-normal)."""
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or len(x) < 2:
        raise InvalidArgumentError("fit_empirical needs at least 2 samples")
    if family == LOGNORMAL:
        if np.any(x <= 0.0):
            raise InvalidArgumentError("log-normal samples must be positive")
        x = np.log(x)
    elif family != NORMAL:
        raise InvalidArgumentError(f"unknown family {family!r}")
    floor = SIGMA_MIN[family] if sigma_min is None else sigma_min
    mu = float(np.mean(x))
    sigma = float(np.sqrt(np.mean((x - mu) ** 2)))
    return DistParams(family, mu, max(sigma, floor))


def nll(params: DistParams, samples) -> float:
    """Mean negative log-density of the samples."""
    x = np.asarray(samples, dtype=float)
    if params.family == LOGNORMAL:
        if np.any(x <= 0.0):
            raise InvalidArgumentError("log-normal samples must be positive")
        logx = np.log(x)
        z = (logx - params.mu) / params.sigma
        return float(np.mean(logx + math.log(params.sigma) + _HALF_LOG_2PI + 0.5 * z * z))
    z = (x - params.mu) / params.sigma
    return float(np.mean(math.log(params.sigma) + _HALF_LOG_2PI + 0.5 * z * z))


def empirical_percentile(samples, q: float = 95.0) -> float:
    return float(np.percentile(np.asarray(samples, dtype=float), q))
