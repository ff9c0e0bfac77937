"""Rao-Blackwellized particle filter over occupancy grids, plus localization-only MCL."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .geometry import Pose2
from .gridmap import OccupancyGrid, occupied_distance_map, update_occupancy
from .motion import MotionNoise, OdometryDelta, sample_motion
from .rng import STREAM_INIT, STREAM_PARTICLE, STREAM_RESAMPLE, substream
from .simworld import LaserScan


@dataclass(frozen=True)
class FastSlamConfig:
    n_particles: int = 50
    noise: MotionNoise = field(default_factory=MotionNoise)
    z_hit: float = 0.9
    z_rand: float = 0.1
    sigma_hit: float = 0.2
    beam_step: int = 5
    resample_every_step: bool = False

    def __post_init__(self) -> None:
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")
        if self.beam_step < 1:
            raise ValueError("beam_step must be >= 1")


@dataclass
class Particle:
    """One trajectory hypothesis with its privately owned map."""

    pose: Pose2
    weight: float
    grid: OccupancyGrid
    trajectory: list[Pose2]
    edt: np.ndarray | None = None

    def copy(self) -> "Particle":
        # the cached distance map is immutable once built; share the reference
        return Particle(self.pose, self.weight, self.grid.copy(), list(self.trajectory), self.edt)


@dataclass
class ParticleSet:
    particles: list[Particle]
    step_count: int = 0

    def weights(self) -> np.ndarray:
        return np.array([p.weight for p in self.particles])

    def best(self) -> Particle:
        return max(self.particles, key=lambda p: p.weight)


@dataclass(frozen=True)
class StepInfo:
    n_eff: float
    resampled: bool
    degenerate: bool


def effective_sample_size(weights: np.ndarray) -> float:
    """1 / sum of squared (normalized) weights."""
    w = np.asarray(weights, dtype=np.float64)
    return float(1.0 / np.sum(w * w))


def low_variance_resample(pset: ParticleSet, rng: np.random.Generator) -> ParticleSet:
    """Systematic resampling with a single uniform draw and a 1/M comb."""
    m = len(pset.particles)
    w = pset.weights()
    positions = rng.uniform(0.0, 1.0 / m) + np.arange(m) / m
    cum = np.cumsum(w)
    idx = np.minimum(np.searchsorted(cum, positions, side="left"), m - 1)
    out = [pset.particles[i].copy() for i in idx]
    for p in out:
        p.weight = 1.0 / m
    return ParticleSet(out, pset.step_count)


def measurement_loglik(
    scan: LaserScan,
    pose: Pose2,
    grid: OccupancyGrid,
    cfg: FastSlamConfig,
    edt: np.ndarray | None = None,
) -> tuple[float, int]:
    """Likelihood-field log score of every cfg.beam_step-th returned beam."""
    if edt is None:
        edt = occupied_distance_map(grid)
    k = cfg.beam_step
    return kernels.scan_loglik(
        grid.cells,
        edt,
        grid.origin.x,
        grid.origin.y,
        grid.resolution,
        pose.x,
        pose.y,
        pose.theta,
        np.ascontiguousarray(scan.bearings[::k]),
        np.ascontiguousarray(scan.ranges[::k]),
        np.ascontiguousarray(scan.returned[::k]).astype(np.uint8),
        cfg.z_hit,
        cfg.sigma_hit,
        cfg.z_rand,
        scan.range_max,
    )


def measurement_likelihood(
    scan: LaserScan,
    pose: Pose2,
    grid: OccupancyGrid,
    cfg: FastSlamConfig,
    edt: np.ndarray | None = None,
) -> float:
    """Product-form likelihood (exponentiated log score); never exactly zero."""
    ll, _ = measurement_loglik(scan, pose, grid, cfg, edt)
    return math.exp(ll)


class FastSlam:
    """Grid-based filter: sample poses, weight on the pre-update map, then map."""

    def __init__(
        self, grid_template: OccupancyGrid, start: Pose2, config: FastSlamConfig, seed: int
    ) -> None:
        self.config = config
        self.seed = seed
        m = config.n_particles
        self._particle_rngs = [substream(seed, STREAM_PARTICLE, i) for i in range(m)]
        self._resample_rng = substream(seed, STREAM_RESAMPLE)
        self.pset = ParticleSet(
            [
                Particle(pose=start, weight=1.0 / m, grid=grid_template.copy(), trajectory=[start])
                for _ in range(m)
            ]
        )
        self.degenerate_steps = 0
        self.resample_count = 0

    def step(self, delta: OdometryDelta, scan: LaserScan) -> StepInfo:
        """One filter update from an odometry increment and the scan taken after it."""
        cfg = self.config
        particles = self.pset.particles
        m = len(particles)
        logliks = np.empty(m)
        n_used = 0
        for i, p in enumerate(particles):
            p.pose = sample_motion(p.pose, delta, cfg.noise, self._particle_rngs[i])
            if p.edt is None:
                p.edt = occupied_distance_map(p.grid)
            logliks[i], n_used = measurement_loglik(scan, p.pose, p.grid, cfg, p.edt)
        degenerate = n_used == 0 or not np.all(np.isfinite(logliks))
        if degenerate:
            weights = np.full(m, 1.0 / m)
            self.degenerate_steps += 1
        else:
            shifted = np.exp(logliks - logliks.max())
            weights = shifted / shifted.sum()
        for i, p in enumerate(particles):
            p.weight = float(weights[i])
            changed = update_occupancy(p.grid, p.pose, scan)
            if changed:
                p.edt = None
            p.trajectory.append(p.pose)
        self.pset.step_count += 1
        n_eff = effective_sample_size(weights)
        resampled = False
        if m > 1 and (cfg.resample_every_step or n_eff < m / 2.0):
            self.pset = low_variance_resample(self.pset, self._resample_rng)
            self.resample_count += 1
            resampled = True
        return StepInfo(n_eff=n_eff, resampled=resampled, degenerate=degenerate)

    def best_particle(self) -> Particle:
        return self.pset.best()


@dataclass(frozen=True)
class MclConfig:
    n_particles: int = 50
    noise: MotionNoise = field(default_factory=MotionNoise)
    z_hit: float = 0.9
    z_rand: float = 0.1
    sigma_hit: float = 0.2
    beam_step: int = 5
    resample_every_step: bool = False
    init_std_xy: float = 0.1
    init_std_theta: float = 0.05
    lost_after: int = 10

    def _field_cfg(self) -> FastSlamConfig:
        return FastSlamConfig(
            n_particles=self.n_particles,
            noise=self.noise,
            z_hit=self.z_hit,
            z_rand=self.z_rand,
            sigma_hit=self.sigma_hit,
            beam_step=self.beam_step,
        )


class MonteCarloLocalizer:
    """Particle localization against a frozen map; the map is never written."""

    def __init__(self, grid: OccupancyGrid, start: Pose2, config: MclConfig, seed: int) -> None:
        self.grid = grid
        self.config = config
        self._edt = occupied_distance_map(grid)
        self._rng = substream(seed, STREAM_PARTICLE)
        self._resample_rng = substream(seed, STREAM_RESAMPLE)
        init_rng = substream(seed, STREAM_INIT)
        m = config.n_particles
        xs = start.x + init_rng.normal(0.0, config.init_std_xy, m)
        ys = start.y + init_rng.normal(0.0, config.init_std_xy, m)
        ths = start.theta + init_rng.normal(0.0, config.init_std_theta, m)
        self.poses = [Pose2(float(x), float(y), float(t)) for x, y, t in zip(xs, ys, ths)]
        self.weights = np.full(m, 1.0 / m)
        self._floor_streak = 0
        self.lost = False

    def step(self, delta: OdometryDelta, scan: LaserScan) -> Pose2:
        cfg = self.config
        fcfg = cfg._field_cfg()
        m = len(self.poses)
        self.poses = [sample_motion(p, delta, cfg.noise, self._rng) for p in self.poses]
        logliks = np.empty(m)
        n_used = 0
        for i, pose in enumerate(self.poses):
            logliks[i], n_used = measurement_loglik(scan, pose, self.grid, fcfg, self._edt)
        if n_used == 0 or not np.all(np.isfinite(logliks)):
            self.weights = np.full(m, 1.0 / m)
        else:
            shifted = np.exp(logliks - logliks.max())
            self.weights = shifted / shifted.sum()
            floor_ll = n_used * math.log(fcfg.z_rand / scan.range_max)
            if float(logliks.max()) <= floor_ll + 1e-9:
                self._floor_streak += 1
            else:
                self._floor_streak = 0
            self.lost = self._floor_streak >= cfg.lost_after
        n_eff = effective_sample_size(self.weights)
        if m > 1 and (cfg.resample_every_step or n_eff < m / 2.0):
            r = float(self._resample_rng.uniform(0.0, 1.0 / m))
            positions = r + np.arange(m) / m
            cum = np.cumsum(self.weights)
            idx = np.minimum(np.searchsorted(cum, positions, side="left"), m - 1)
            self.poses = [self.poses[i] for i in idx]
            self.weights = np.full(m, 1.0 / m)
        return self.estimate()

    def estimate(self) -> Pose2:
        """Weighted mean position with a circular mean heading."""
        w = self.weights
        x = float(np.dot(w, [p.x for p in self.poses]))
        y = float(np.dot(w, [p.y for p in self.poses]))
        s = float(np.dot(w, [math.sin(p.theta) for p in self.poses]))
        c = float(np.dot(w, [math.cos(p.theta) for p in self.poses]))
        return Pose2(x, y, math.atan2(s, c))


def localize(grid, stream, config: MclConfig, seed: int, start: Pose2):
    """Generator form of MCL: yields one estimate per (delta, scan) item."""
    mcl = MonteCarloLocalizer(grid, start, config, seed)
    for delta, scan in stream:
        yield mcl.step(delta, scan)
