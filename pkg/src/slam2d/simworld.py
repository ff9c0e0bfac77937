"""Ground-truth 2D world, differential-drive kinematics, and raycast lidar."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import kernels
from .geometry import Pose2, Twist
from .motion import MotionNoise, decompose_delta, sample_motion
from .rng import STREAM_MOTION, STREAM_SENSOR, substream

WORLD_FORMAT = 1
ROBOT_RADIUS = 0.2
DEFAULT_V_MAX = 1.0
DEFAULT_W_MAX = 2.0

# keeps returned ranges inside (0, range_max)
_RANGE_FLOOR = 1e-6


@dataclass(frozen=True)
class ScanParams:
    """Lidar fan geometry and noise."""

    n_beams: int = 360
    angle_min: float = -math.pi
    angle_increment: float = 2.0 * math.pi / 360.0
    range_max: float = 8.0
    sigma: float = 0.02

    def __post_init__(self) -> None:
        if self.n_beams < 1:
            raise ValueError("n_beams must be >= 1")
        if self.range_max <= 0.0:
            raise ValueError("range_max must be positive")
        if self.sigma < 0.0:
            raise ValueError("sigma must be >= 0")

    @property
    def bearings(self) -> np.ndarray:
        return self.angle_min + self.angle_increment * np.arange(self.n_beams)


@dataclass(frozen=True)
class LaserScan:
    """One lidar sweep. Beams without a return carry range_max exactly."""

    angle_min: float
    angle_increment: float
    n_beams: int
    range_max: float
    ranges: np.ndarray
    returned: np.ndarray

    def __post_init__(self) -> None:
        ranges = np.asarray(self.ranges, dtype=np.float64)
        returned = np.asarray(self.returned, dtype=bool)
        object.__setattr__(self, "ranges", ranges)
        object.__setattr__(self, "returned", returned)
        if ranges.shape != (self.n_beams,) or returned.shape != (self.n_beams,):
            raise ValueError("ranges/returned must have n_beams entries")
        if np.any(ranges <= 0.0) or np.any(ranges > self.range_max):
            raise ValueError("ranges must lie in (0, range_max]")
        if np.any(ranges[~returned] != self.range_max):
            raise ValueError("no-return beams must carry range_max")
        ranges.setflags(write=False)
        returned.setflags(write=False)

    @property
    def bearings(self) -> np.ndarray:
        return self.angle_min + self.angle_increment * np.arange(self.n_beams)


def _point_segment_distance(px: float, py: float, segments: np.ndarray) -> np.ndarray:
    """Distance from one point to each segment."""
    ax, ay = segments[:, 0], segments[:, 1]
    ux = segments[:, 2] - ax
    uy = segments[:, 3] - ay
    ll = ux * ux + uy * uy
    t = np.where(ll > 0.0, ((px - ax) * ux + (py - ay) * uy) / np.where(ll > 0.0, ll, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    cx = ax + t * ux
    cy = ay + t * uy
    return np.hypot(px - cx, py - cy)


@dataclass(frozen=True)
class WorldModel:
    """Static wall-segment world with an axis-aligned boundary and a spawn pose."""

    name: str
    bounds: tuple[float, float, float, float]
    spawn: Pose2
    segments: np.ndarray

    def __post_init__(self) -> None:
        segments = np.asarray(self.segments, dtype=np.float64).reshape(-1, 4)
        object.__setattr__(self, "segments", segments)
        xmin, ymin, xmax, ymax = self.bounds
        if not (xmin < xmax and ymin < ymax):
            raise ValueError(f"world {self.name!r}: degenerate bounds {self.bounds}")
        eps = 1e-9
        xs = segments[:, (0, 2)]
        ys = segments[:, (1, 3)]
        if segments.size and (
            xs.min() < xmin - eps or xs.max() > xmax + eps or ys.min() < ymin - eps or ys.max() > ymax + eps
        ):
            raise ValueError(f"world {self.name!r}: segments extend beyond bounds")
        if segments.size:
            d = _point_segment_distance(self.spawn.x, self.spawn.y, segments)
            if float(d.min()) <= ROBOT_RADIUS:
                raise ValueError(f"world {self.name!r}: spawn is within robot radius of a wall")
        segments.setflags(write=False)

    @classmethod
    def from_dict(cls, data: dict) -> "WorldModel":
        if data.get("format") != WORLD_FORMAT:
            raise ValueError(f"unsupported world format {data.get('format')!r}")
        b = data["bounds"]
        s = data["spawn"]
        segs = [[seg["x1"], seg["y1"], seg["x2"], seg["y2"]] for seg in data["segments"]]
        return cls(
            name=data["name"],
            bounds=(b["xmin"], b["ymin"], b["xmax"], b["ymax"]),
            spawn=Pose2(s["x"], s["y"], s["theta"]),
            segments=np.asarray(segs, dtype=np.float64).reshape(-1, 4),
        )

    def to_dict(self) -> dict:
        xmin, ymin, xmax, ymax = self.bounds
        return {
            "format": WORLD_FORMAT,
            "name": self.name,
            "bounds": {"xmin": xmin, "ymin": ymin, "xmax": xmax, "ymax": ymax},
            "spawn": {"x": self.spawn.x, "y": self.spawn.y, "theta": self.spawn.theta},
            "segments": [
                {"x1": float(s[0]), "y1": float(s[1]), "x2": float(s[2]), "y2": float(s[3])}
                for s in self.segments
            ],
        }

    @classmethod
    def load(cls, path: str | Path) -> "WorldModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


def bundled_world_path(name: str) -> Path:
    """Filesystem path of a world shipped with the package."""
    base = resources.files("slam2d") / "worlds" / f"{name}.json"
    with resources.as_file(base) as p:
        if not p.exists():
            raise FileNotFoundError(f"no bundled world named {name!r}")
        return p


def bundled_world(name: str) -> WorldModel:
    return WorldModel.load(bundled_world_path(name))


def raycast(
    world: WorldModel,
    pose: Pose2,
    params: ScanParams,
    noise_sigma: float,
    rng: np.random.Generator | None,
) -> LaserScan:
    """Cast the scan fan from a pose; optionally perturb ranges with Gaussian noise."""
    bearings = params.bearings
    t = kernels.raycast(world.segments, pose.x, pose.y, pose.theta + bearings, params.range_max)
    hit = np.isfinite(t) & (t < params.range_max)
    if noise_sigma > 0.0:
        if rng is None:
            raise ValueError("noise_sigma > 0 requires an rng")
        t = t + rng.normal(0.0, noise_sigma, params.n_beams)
    ranges = np.where(
        hit,
        np.clip(t, _RANGE_FLOOR, np.nextafter(params.range_max, 0.0)),
        params.range_max,
    )
    return LaserScan(
        angle_min=params.angle_min,
        angle_increment=params.angle_increment,
        n_beams=params.n_beams,
        range_max=params.range_max,
        ranges=ranges,
        returned=hit,
    )


@dataclass(frozen=True)
class SimState:
    """Snapshot of the simulated robot."""

    true_pose: Pose2
    odom_pose: Pose2
    time: float = 0.0


def _chord(v: float, w: float, dt: float) -> tuple[float, float]:
    """Chord length and half-turn of an exact constant-twist arc."""
    half = 0.5 * w * dt
    if abs(half) < 1e-12:
        factor = 1.0
    else:
        factor = math.sin(half) / half
    return v * dt * factor, half


def _earliest_contact(
    px: float, py: float, dx: float, dy: float, segments: np.ndarray, radius: float
) -> float:
    """First t in [0,1] where the point px,py + t*(dx,dy) touches any inflated segment."""
    best = 1.0
    move2 = dx * dx + dy * dy
    if move2 == 0.0 or segments.size == 0:
        return best
    r2 = radius * radius
    for ax, ay, bx, by in segments:
        ux = bx - ax
        uy = by - ay
        ll = ux * ux + uy * uy
        # endpoint circles
        ends = ((ax, ay), (bx, by)) if ll > 0.0 else ((ax, ay),)
        for cx, cy in ends:
            fx = px - cx
            fy = py - cy
            bq = 2.0 * (fx * dx + fy * dy)
            cq = fx * fx + fy * fy - r2
            if cq < 0.0:
                if bq < 0.0:
                    return 0.0
                continue
            disc = bq * bq - 4.0 * move2 * cq
            if disc < 0.0:
                continue
            t0 = (-bq - math.sqrt(disc)) / (2.0 * move2)
            if 0.0 <= t0 <= best:
                best = t0
        if ll == 0.0:
            continue
        # side walls of the inflated band
        inv_len = 1.0 / math.sqrt(ll)
        nx = -uy * inv_len
        ny = ux * inv_len
        s0 = nx * (px - ax) + ny * (py - ay)
        sv = nx * dx + ny * dy
        if abs(s0) < radius:
            tau = (ux * (px - ax) + uy * (py - ay)) / ll
            if 0.0 <= tau <= 1.0 and s0 * sv < 0.0:
                return 0.0
        if sv != 0.0:
            for target in (radius, -radius):
                t0 = (target - s0) / sv
                if not 0.0 <= t0 <= best:
                    continue
                # entering only: approaching from outside the band surface
                if target > 0.0 and not (s0 > target and sv < 0.0):
                    continue
                if target < 0.0 and not (s0 < target and sv > 0.0):
                    continue
                qx = px + t0 * dx
                qy = py + t0 * dy
                tau = (ux * (qx - ax) + uy * (qy - ay)) / ll
                if 0.0 <= tau <= 1.0:
                    best = t0
    return max(best, 0.0)


class Simulator:
    """Single-robot kinematic simulator with noisy odometry and lidar."""

    def __init__(
        self,
        world: WorldModel,
        seed: int,
        params: ScanParams | None = None,
        noise: MotionNoise | None = None,
        radius: float = ROBOT_RADIUS,
        v_max: float = DEFAULT_V_MAX,
        w_max: float = DEFAULT_W_MAX,
    ) -> None:
        self.world = world
        self.params = params if params is not None else ScanParams()
        self.noise = noise if noise is not None else MotionNoise()
        self.radius = radius
        self.v_max = v_max
        self.w_max = w_max
        self.seed = seed
        self._motion_rng = substream(seed, STREAM_MOTION)
        self._sensor_rng = substream(seed, STREAM_SENSOR)
        self.state = SimState(true_pose=world.spawn, odom_pose=world.spawn, time=0.0)

    def step(self, cmd: Twist, dt: float) -> SimState:
        """Advance one control period; returns the new state."""
        if not 0.0 < dt <= 0.5:
            raise ValueError(f"dt must be in (0, 0.5], got {dt}")
        cmd = cmd.clamped(self.v_max, self.w_max)
        prev = self.state.true_pose
        chord, half = _chord(cmd.v, cmd.w, dt)
        heading = prev.theta + half
        dx = chord * math.cos(heading)
        dy = chord * math.sin(heading)
        t_hit = _earliest_contact(prev.x, prev.y, dx, dy, self.world.segments, self.radius)
        new_true = Pose2(prev.x + t_hit * dx, prev.y + t_hit * dy, prev.theta + cmd.w * dt)
        delta = decompose_delta(prev, new_true)
        new_odom = sample_motion(self.state.odom_pose, delta, self.noise, self._motion_rng)
        self.state = SimState(true_pose=new_true, odom_pose=new_odom, time=self.state.time + dt)
        return self.state

    def scan(self) -> LaserScan:
        """Lidar sweep from the current true pose."""
        return raycast(
            self.world, self.state.true_pose, self.params, self.params.sigma, self._sensor_rng
        )
