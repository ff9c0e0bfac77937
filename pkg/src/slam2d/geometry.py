"""SE(2) poses, composition, relative transforms and angle normalization.

Everything here is a pure value operation on plain floats; no numpy needed.
The angle convention is (-pi, pi] with pi kept (not mapped to -pi).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Normalize an angle to (-pi, pi]. -pi maps to +pi; the result equals theta mod 2pi."""
    if not math.isfinite(theta):
        raise ValueError(f"angle must be finite, got {theta!r}")
    wrapped = theta - TWO_PI * math.ceil((theta - math.pi) / TWO_PI)
    # rounding of the 2*pi multiple can land a hair outside the half-open interval
    if wrapped <= -math.pi:
        wrapped += TWO_PI
    elif wrapped > math.pi:
        wrapped -= TWO_PI
    return wrapped


@dataclass(frozen=True)
class Pose2:
    """Planar pose (x, y, heading). Heading is stored normalized to (-pi, pi]."""

    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"pose position must be finite, got ({self.x!r}, {self.y!r})")
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.theta)


@dataclass(frozen=True)
class Twist:
    """Body-frame velocity command: v forward (m/s), w counterclockwise (rad/s)."""

    v: float
    w: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.v) and math.isfinite(self.w)):
            raise ValueError(f"twist must be finite, got ({self.v!r}, {self.w!r})")

    def clamped(self, v_max: float, w_max: float) -> "Twist":
        return Twist(
            min(max(self.v, -v_max), v_max),
            min(max(self.w, -w_max), w_max),
        )


def compose(a: Pose2, b: Pose2) -> Pose2:
    """a (+) b: pose b expressed in a's frame, mapped to the world frame."""
    c = math.cos(a.theta)
    s = math.sin(a.theta)
    return Pose2(
        a.x + c * b.x - s * b.y,
        a.y + s * b.x + c * b.y,
        a.theta + b.theta,
    )


def inverse(p: Pose2) -> Pose2:
    """The pose q with compose(p, q) == identity."""
    c = math.cos(p.theta)
    s = math.sin(p.theta)
    return Pose2(-(c * p.x + s * p.y), s * p.x - c * p.y, -p.theta)


def between(a: Pose2, b: Pose2) -> Pose2:
    """a^-1 (+) b: pose b expressed in a's frame."""
    c = math.cos(a.theta)
    s = math.sin(a.theta)
    dx = b.x - a.x
    dy = b.y - a.y
    return Pose2(c * dx + s * dy, -s * dx + c * dy, b.theta - a.theta)
