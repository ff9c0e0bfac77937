"""Scripted drive routes and the pure-pursuit controller that follows them.

Mapping sessions need repeatable trajectories: a route is a polyline of
waypoints tied to a named world, and the controller turns the current pose
into velocity commands until the final waypoint is reached.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .geometry import Pose2, Twist, wrap_angle
from .simworld import DEFAULT_W_MAX

__all__ = [
    "ScriptedRoute",
    "PurePursuit",
    "scripted_route",
    "route_names",
]


@dataclass(frozen=True)
class ScriptedRoute:
    """A named waypoint polyline for a specific bundled world."""

    name: str
    world: str
    waypoints: tuple[tuple[float, float], ...]
    speed: float

    def __post_init__(self) -> None:
        if len(self.waypoints) < 2:
            raise ValueError("route needs at least two waypoints")
        if not self.speed > 0.0:
            raise ValueError("speed must be positive")

    def length(self) -> float:
        """Total polyline length in meters."""
        total = 0.0
        for (ax, ay), (bx, by) in zip(self.waypoints, self.waypoints[1:]):
            total += math.hypot(bx - ax, by - ay)
        return total


_KITCHEN_LAP = ((1.0, 2.8), (10.0, 2.8), (10.0, 6.2), (1.0, 6.2))

_ROUTES = {
    "square_loop": ScriptedRoute(
        name="square_loop",
        world="cafe",
        waypoints=((1.2, 1.2), (6.6, 1.2), (6.6, 4.4), (1.2, 4.4), (1.2, 1.2)),
        speed=0.8,
    ),
    "double_loop_kitchen": ScriptedRoute(
        name="double_loop_kitchen",
        world="kitchen_dining",
        waypoints=_KITCHEN_LAP + _KITCHEN_LAP + ((1.0, 2.8),),
        speed=0.7,
    ),
    "cafe_tour": ScriptedRoute(
        name="cafe_tour",
        world="cafe",
        waypoints=(
            (1.2, 1.2),
            (6.8, 1.2),
            (6.8, 4.6),
            (1.8, 4.6),
            (1.8, 1.2),
            (1.2, 1.2),
        ),
        speed=0.8,
    ),
}


def route_names() -> tuple[str, ...]:
    return tuple(sorted(_ROUTES))


def scripted_route(name: str) -> ScriptedRoute:
    try:
        return _ROUTES[name]
    except KeyError:
        known = ", ".join(route_names())
        raise ValueError(f"unknown route {name!r}; available: {known}") from None


@dataclass
class PurePursuit:
    """Waypoint follower issuing velocity commands toward a lookahead target.

    The target waypoint advances whenever the robot is within ``lookahead``
    of it; the route is finished when the last waypoint is within
    ``arrive_tolerance``.  Curvature follows the lookahead geometry
    (2 sin(alpha) / L) and forward speed is scaled down in sharp turns so
    corners are not cut wide.
    """

    route: ScriptedRoute
    lookahead: float = 0.5
    arrive_tolerance: float = 0.25
    w_max: float = DEFAULT_W_MAX
    _target: int = field(default=1, init=False)

    def __post_init__(self) -> None:
        if not self.lookahead > 0.0:
            raise ValueError("lookahead must be positive")
        if not 0.0 < self.arrive_tolerance <= self.lookahead:
            raise ValueError("arrive_tolerance must be in (0, lookahead]")

    @property
    def target_index(self) -> int:
        return self._target

    def command(self, pose: Pose2) -> Twist | None:
        """Next velocity command from ``pose``, or None when finished."""
        waypoints = self.route.waypoints
        last = len(waypoints) - 1
        while self._target < last:
            tx, ty = waypoints[self._target]
            if math.hypot(tx - pose.x, ty - pose.y) >= self.lookahead:
                break
            self._target += 1

        tx, ty = waypoints[self._target]
        dist = math.hypot(tx - pose.x, ty - pose.y)
        if self._target == last and dist < self.arrive_tolerance:
            return None

        alpha = wrap_angle(math.atan2(ty - pose.y, tx - pose.x) - pose.theta)
        # sin(alpha) fades for a target behind the robot; saturate so the
        # turn keeps pulling the short way around.
        steer = math.sin(alpha) if abs(alpha) <= 0.5 * math.pi else math.copysign(1.0, alpha)
        curvature = 2.0 * steer / self.lookahead
        # Slow down through sharp turns; a corner taken at full speed with
        # saturated turn rate sweeps an arc of radius v / w_max.
        v = self.route.speed * max(0.25, math.cos(alpha))
        w = max(-self.w_max, min(self.w_max, v * curvature))
        return Twist(v, w)
