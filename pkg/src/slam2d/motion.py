"""Odometry motion model: rot1/trans/rot2 decomposition and noisy sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Pose2, wrap_angle

# below this translation the bearing of the step is numerically meaningless
_TRANS_EPS = 1e-9


@dataclass(frozen=True)
class OdometryDelta:
    """One odometry step split into initial turn, translation, final turn."""

    rot1: float
    trans: float
    rot2: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "rot1", wrap_angle(self.rot1))
        object.__setattr__(self, "rot2", wrap_angle(self.rot2))
        if not math.isfinite(self.trans):
            raise ValueError("trans must be finite")


@dataclass(frozen=True)
class MotionNoise:
    """Dimensionless coefficients scaling odometry noise variances."""

    alpha1: float = 0.05
    alpha2: float = 0.01
    alpha3: float = 0.05
    alpha4: float = 0.01

    def __post_init__(self) -> None:
        for name in ("alpha1", "alpha2", "alpha3", "alpha4"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")


def decompose_delta(prev: Pose2, curr: Pose2) -> OdometryDelta:
    """Express the step from prev to curr as (rot1, trans, rot2)."""
    dx = curr.x - prev.x
    dy = curr.y - prev.y
    trans = math.hypot(dx, dy)
    if trans < _TRANS_EPS:
        rot1 = 0.0
    else:
        rot1 = wrap_angle(math.atan2(dy, dx) - prev.theta)
    rot2 = wrap_angle(curr.theta - prev.theta - rot1)
    return OdometryDelta(rot1, trans, rot2)


def apply_delta(pose: Pose2, delta: OdometryDelta) -> Pose2:
    """Apply (rot1, trans, rot2) to a pose."""
    heading = pose.theta + delta.rot1
    return Pose2(
        pose.x + delta.trans * math.cos(heading),
        pose.y + delta.trans * math.sin(heading),
        heading + delta.rot2,
    )


def sample_motion(
    pose: Pose2, delta: OdometryDelta, noise: MotionNoise, rng: np.random.Generator
) -> Pose2:
    """Draw one pose from the odometry motion model.

    Each component of the delta is perturbed by zero-mean Gaussian noise whose
    variance scales with the motion magnitudes: turns pick up alpha1 times
    their own square plus alpha2 times the squared translation, the
    translation picks up alpha3 times its own square plus alpha4 times the
    squared turns. Zero motion with any coefficients stays exact.
    """
    r1s = delta.rot1 * delta.rot1
    r2s = delta.rot2 * delta.rot2
    ts = delta.trans * delta.trans
    var_rot1 = noise.alpha1 * r1s + noise.alpha2 * ts
    var_trans = noise.alpha3 * ts + noise.alpha4 * (r1s + r2s)
    var_rot2 = noise.alpha1 * r2s + noise.alpha2 * ts
    rot1 = delta.rot1 + _draw(rng, var_rot1)
    trans = delta.trans + _draw(rng, var_trans)
    rot2 = delta.rot2 + _draw(rng, var_rot2)
    return apply_delta(pose, OdometryDelta(rot1, trans, rot2))


def _draw(rng: np.random.Generator, variance: float) -> float:
    if variance <= 0.0:
        return 0.0
    return float(rng.normal(0.0, math.sqrt(variance)))
