"""End-to-end runs: simulator, SLAM engine, logging, and metrics.

A session steps the simulator at a fixed 10 Hz, feeds odometry and scans
into the selected estimator, and records one log line per step.  Three
modes are supported:

* ``fastslam``: particle filter mapping, every scan weighted and mapped
* ``graphslam``: dead-reckoned keyframe chain with appearance-based loop
  closure; the graph re-optimizes after each accepted closure
* ``localization``: particle localization against a previously saved map,
  which is never modified

Scripted sessions replay a bundled waypoint route; external sessions are
driven one command at a time (the teleop bridge does this).
"""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .fastslam import FastSlam, FastSlamConfig, MclConfig, MonteCarloLocalizer
from .geometry import Pose2, Twist, between, compose, inverse
from .gridmap import (
    CLASS_FREE,
    CLASS_OCCUPIED,
    CLASS_UNKNOWN,
    OccupancyGrid,
    grid_for_world,
    rasterize_world,
    update_occupancy,
)
from .loopclosure import (
    LoopClosureMemory,
    LoopClosureParams,
    LoopConstraint,
    VerificationFailure,
    describe,
    detect,
    verify,
)
from .mapio import load_map
from .motion import MotionNoise, decompose_delta
from .posegraph import (
    DEFAULT_ANCHOR_INFO,
    DEFAULT_LOOP_INFO,
    DEFAULT_ODOM_INFO,
    Anchor,
    GraphEdge,
    OptimizeStats,
    PoseGraph,
    PoseNode,
    optimize,
)
from .session import Metrics, SessionWriter, delta_to_json, scan_to_json
from .simworld import ScanParams, Simulator, WorldModel, bundled_world
from .trajectories import PurePursuit, scripted_route

__all__ = [
    "DT",
    "MODES",
    "ConfigError",
    "SessionConfig",
    "MappingSession",
    "run_mapping",
    "run_localization",
    "build_known_pose_map",
    "ate_rmse",
    "cell_agreement",
]

DT = 0.1
MODES = ("fastslam", "graphslam", "localization")

# route-driven runs still sample odometry noise; these keep lap drift well
# inside the loop verifier's translation search window
SCRIPT_ODOMETRY_ALPHAS = (0.02, 0.005, 0.02, 0.005)


class ConfigError(ValueError):
    """Invalid session configuration (CLI exit code 1)."""


@dataclass
class SessionConfig:
    """Everything needed to reproduce a run."""

    mode: str
    seed: int
    world: str | None = None
    route: str | None = None
    out: str | None = None
    map_dir: str | None = None
    n_particles: int = 50
    keyframe_every: int = 10
    sim_alphas: tuple[float, float, float, float] = SCRIPT_ODOMETRY_ALPHAS
    filter_alphas: tuple[float, float, float, float] = (0.05, 0.01, 0.05, 0.01)
    loop_sim_threshold: float = 0.92
    loop_verify_threshold: float = 0.6
    loop_consistency_xy: float = 2.0
    max_steps: int | None = None

    def __post_init__(self) -> None:
        self.sim_alphas = tuple(float(a) for a in self.sim_alphas)
        self.filter_alphas = tuple(float(a) for a in self.filter_alphas)
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer")
        if self.mode == "localization" and not self.map_dir:
            raise ConfigError("localization mode requires map_dir")
        if self.world is None and self.route is None:
            raise ConfigError("need a world, a route, or both")
        if self.n_particles < 1:
            raise ConfigError("n_particles must be >= 1")
        if self.keyframe_every < 1:
            raise ConfigError("keyframe_every must be >= 1")
        for name in ("sim_alphas", "filter_alphas"):
            vals = getattr(self, name)
            if len(vals) != 4 or any(a < 0.0 for a in vals):
                raise ConfigError(f"{name} must be four non-negative coefficients")
        if not 0.0 <= self.loop_sim_threshold <= 1.0:
            raise ConfigError("loop_sim_threshold must be in [0, 1]")
        if not 0.0 <= self.loop_verify_threshold <= 1.0:
            raise ConfigError("loop_verify_threshold must be in [0, 1]")
        if self.loop_consistency_xy <= 0.0:
            raise ConfigError("loop_consistency_xy must be positive")
        if self.max_steps is not None and self.max_steps < 0:
            raise ConfigError("max_steps must be >= 0")

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["sim_alphas"] = list(self.sim_alphas)
        d["filter_alphas"] = list(self.filter_alphas)
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SessionConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        missing = {"mode", "seed"} - set(d)
        if missing:
            raise ConfigError(f"missing required config keys: {sorted(missing)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def resolve_world(config: SessionConfig) -> WorldModel:
    """World named in the config, else the route's world."""
    name = config.world
    if name is None:
        name = scripted_route(config.route).world
    path = Path(name)
    try:
        if path.suffix == ".json":
            return WorldModel.load(path)
        return bundled_world(name)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot load world {name!r}: {exc}") from exc


def ate_rmse(estimated: list[Pose2], truth: list[Pose2]) -> float:
    """Root-mean-square position error after rigidly mapping the estimate
    frame so the first poses coincide."""
    if len(estimated) != len(truth):
        raise ValueError(f"trajectory lengths differ: {len(estimated)} vs {len(truth)}")
    if not estimated:
        raise ValueError("need at least one pose")
    t = compose(truth[0], inverse(estimated[0]))
    sq = 0.0
    for est, gt in zip(estimated, truth):
        aligned = compose(t, est)
        sq += (aligned.x - gt.x) ** 2 + (aligned.y - gt.y) ** 2
    return math.sqrt(sq / len(estimated))


def cell_agreement(grid: OccupancyGrid, world: WorldModel) -> float:
    """Fraction of observed cells matching the rasterized world walls."""
    walls = rasterize_world(world, grid)
    est = grid.classes()
    observed = est != CLASS_UNKNOWN
    if not observed.any():
        return 1.0
    gt = np.where(walls, CLASS_OCCUPIED, CLASS_FREE)
    return float((est[observed] == gt[observed]).mean())


@dataclass
class _GraphState:
    """Keyframe chain and loop constraints for graphslam mode."""

    estimates: list[Pose2]
    deltas: list[Pose2] = field(default_factory=list)
    odom_at: list[Pose2] = field(default_factory=list)
    gt_at: list[Pose2] = field(default_factory=list)
    dr_at: list[Pose2] = field(default_factory=list)
    scans: list[Any] = field(default_factory=list)
    loops: list[LoopConstraint] = field(default_factory=list)

    def as_graph(self, anchor_prior: Pose2) -> PoseGraph:
        nodes = [PoseNode(i, p) for i, p in enumerate(self.estimates)]
        edges = [
            GraphEdge("odometry", i, i + 1, d, DEFAULT_ODOM_INFO)
            for i, d in enumerate(self.deltas)
        ]
        edges += [
            GraphEdge("loop", c.from_id, c.to_id, c.relative, DEFAULT_LOOP_INFO)
            for c in self.loops
        ]
        return PoseGraph(nodes, edges, Anchor(0, anchor_prior, DEFAULT_ANCHOR_INFO))


class MappingSession:
    """Steps the simulator and the selected estimator one tick at a time."""

    def __init__(self, config: SessionConfig) -> None:
        self.config = config
        self.world = resolve_world(config)
        self.sim = Simulator(
            self.world, seed=config.seed, noise=MotionNoise(*config.sim_alphas)
        )
        self.mode = config.mode
        self.spawn = self.world.spawn
        self.t = 0.0
        self.step_index = 0
        self.loop_count = 0
        self.records: list[dict[str, Any]] = []
        self.est_traj: list[Pose2] = []
        self.gt_traj: list[Pose2] = []
        self.dr_traj: list[Pose2] = []
        self._t0 = time.perf_counter()
        self._odom_prev = self.sim.state.odom_pose

        filter_noise = MotionNoise(*config.filter_alphas)
        if self.mode == "fastslam":
            template = grid_for_world(self.world)
            self.filter = FastSlam(
                template,
                self.spawn,
                FastSlamConfig(n_particles=config.n_particles, noise=filter_noise),
                config.seed,
            )
        elif self.mode == "graphslam":
            self.loop_params = LoopClosureParams(
                sim_threshold=config.loop_sim_threshold,
                verify_threshold=config.loop_verify_threshold,
            )
            self.memory = LoopClosureMemory(self.loop_params)
            scan0 = self.sim.scan()
            self.graph_state = _GraphState(estimates=[self.spawn])
            self.graph_state.odom_at.append(self._odom_prev)
            self.graph_state.gt_at.append(self.sim.state.true_pose)
            self.graph_state.dr_at.append(self._odom_prev)
            self.graph_state.scans.append(scan0)
            self.memory.insert(0, describe(scan0), scan0)
            self.grid = grid_for_world(self.world)
            update_occupancy(self.grid, self.spawn, scan0)
            self.graph: PoseGraph | None = self.graph_state.as_graph(self.spawn)
        else:
            self.loaded_grid = load_map(config.map_dir)
            self.mcl = MonteCarloLocalizer(
                self.loaded_grid,
                self.spawn,
                MclConfig(n_particles=config.n_particles, noise=filter_noise),
                config.seed,
            )

        self._writer = SessionWriter(config.out) if config.out else None

    @property
    def live_grid(self) -> OccupancyGrid:
        """Current best map estimate (streaming view, not the final artifact)."""
        if self.mode == "fastslam":
            return self.filter.best_particle().grid
        if self.mode == "graphslam":
            return self.grid
        return self.loaded_grid

    def step(self, cmd: Twist) -> dict[str, Any]:
        """One 10 Hz tick: simulate, estimate, log."""
        self.step_index += 1
        self.t = round(self.step_index * DT, 6)
        self.sim.step(cmd, DT)
        scan = self.sim.scan()
        odom_now = self.sim.state.odom_pose
        delta = decompose_delta(self._odom_prev, odom_now)
        self._odom_prev = odom_now
        events: list[dict[str, Any]] = []

        if self.mode == "fastslam":
            info = self.filter.step(delta, scan)
            if info.resampled:
                events.append({"kind": "resample", "n_eff": info.n_eff})
            est = self.filter.best_particle().pose
        elif self.mode == "graphslam":
            if self.step_index % self.config.keyframe_every == 0:
                self._keyframe(scan, odom_now, events)
            gs = self.graph_state
            est = compose(gs.estimates[-1], between(gs.odom_at[-1], odom_now))
        else:
            est = self.mcl.step(delta, scan)

        gt = self.sim.state.true_pose
        self.est_traj.append(est)
        self.gt_traj.append(gt)
        self.dr_traj.append(odom_now)
        record = {
            "t": self.t,
            "cmd": [cmd.v, cmd.w],
            "odom_delta": delta_to_json(delta),
            "scan": scan_to_json(scan),
            "est_pose": [est.x, est.y, est.theta],
            "gt_pose": [gt.x, gt.y, gt.theta],
            "events": events,
        }
        self.records.append(record)
        if self._writer is not None:
            self._writer.append(record)
        return record

    def _keyframe(self, scan, odom_now: Pose2, events: list[dict[str, Any]]) -> None:
        gs = self.graph_state
        new_id = len(gs.estimates)
        delta_kf = between(gs.odom_at[-1], odom_now)
        gs.estimates.append(compose(gs.estimates[-1], delta_kf))
        gs.deltas.append(delta_kf)
        gs.odom_at.append(odom_now)
        gs.gt_at.append(self.sim.state.true_pose)
        gs.dr_at.append(odom_now)
        gs.scans.append(scan)
        events.append({"kind": "keyframe", "node": new_id})

        descriptor = describe(scan)
        hits = detect(self.memory, descriptor, new_id)
        self.memory.insert(new_id, descriptor, scan)
        for cand in hits:
            match = verify(
                self.memory.scan_for(cand), scan, Pose2(0.0, 0.0, 0.0), self.loop_params
            )
            if isinstance(match, VerificationFailure):
                events.append(
                    {"kind": "loop_rejected", "from": cand, "to": new_id, "reason": match.reason}
                )
                continue
            rel_graph = between(gs.estimates[cand], gs.estimates[new_id])
            gap = math.hypot(
                match.relative.x - rel_graph.x, match.relative.y - rel_graph.y
            )
            if gap > self.config.loop_consistency_xy:
                events.append(
                    {
                        "kind": "loop_rejected",
                        "from": cand,
                        "to": new_id,
                        "reason": f"inconsistent with odometry by {gap:.2f} m",
                    }
                )
                continue
            gs.loops.append(LoopConstraint(cand, new_id, match.relative, match.score))
            self.loop_count += 1
            events.append(
                {"kind": "loop_closure", "from": cand, "to": new_id, "score": match.score}
            )
            stats = self._optimize()
            events.append(
                {"kind": "optimize", "j_initial": stats.j_initial, "j_final": stats.j_final}
            )
        update_occupancy(self.grid, gs.estimates[new_id], scan)

    def _optimize(self) -> OptimizeStats:
        gs = self.graph_state
        optimized, stats = optimize(gs.as_graph(self.spawn))
        gs.estimates = [n.estimate for n in optimized.nodes]
        self.graph = optimized
        return stats

    def metrics_now(self) -> Metrics:
        if self.mode == "graphslam":
            gs = self.graph_state
            est, gt, dr = gs.estimates, gs.gt_at, gs.dr_at
        elif self.est_traj:
            est, gt, dr = self.est_traj, self.gt_traj, self.dr_traj
        else:
            est = gt = dr = [self.spawn]
        agreement_grid = (
            self.loaded_grid if self.mode == "localization" else self.live_grid
        )
        return Metrics(
            ate_rmse=ate_rmse(est, gt),
            loop_closure_count=self.loop_count,
            cell_agreement=cell_agreement(agreement_grid, self.world),
            dead_reckoning_rmse=ate_rmse(dr, gt),
            wall_time=time.perf_counter() - self._t0,
        )

    def _final_grid(self) -> OccupancyGrid:
        if self.mode == "fastslam":
            return self.filter.best_particle().grid.copy()
        if self.mode == "localization":
            return self.loaded_grid
        # rebuild from optimized keyframe poses so closures straighten the map
        gs = self.graph_state
        grid = grid_for_world(self.world)
        for pose, scan in zip(gs.estimates, gs.scans):
            update_occupancy(grid, pose, scan)
        return grid

    def finish(self) -> tuple[OccupancyGrid, PoseGraph | None, Metrics]:
        """Final artifacts; also completes the streamed session directory."""
        grid = self._final_grid()
        graph = self.graph_state.as_graph(self.spawn) if self.mode == "graphslam" else None
        if self.mode == "graphslam":
            self.graph = graph
        metrics = dataclasses.replace(
            self.metrics_now(), cell_agreement=cell_agreement(grid, self.world)
        )
        if self._writer is not None:
            self._writer.finish(self.config.to_dict(), metrics, grid, graph)
            self._writer = None
        return grid, graph, metrics

    def save(self, dir_path: str | Path) -> Path:
        """Write a full session snapshot without ending the run."""
        writer = SessionWriter(dir_path)
        for record in self.records:
            writer.append(record)
        grid = self._final_grid()
        graph = self.graph_state.as_graph(self.spawn) if self.mode == "graphslam" else None
        metrics = dataclasses.replace(
            self.metrics_now(), cell_agreement=cell_agreement(grid, self.world)
        )
        writer.finish(self.config.to_dict(), metrics, grid, graph)
        return writer.path


def _drive(session: MappingSession) -> list[dict[str, Any]]:
    config = session.config
    if config.route is None:
        return session.records
    route = scripted_route(config.route)
    controller = PurePursuit(route)
    budget = config.max_steps
    if budget is None:
        budget = int(route.length() / route.speed / DT * 1.6) + 200
    while session.step_index < budget:
        cmd = controller.command(session.sim.state.true_pose)
        if cmd is None:
            break
        session.step(cmd)
    return session.records


def run_mapping(
    config: SessionConfig,
) -> tuple[list[dict[str, Any]], OccupancyGrid, PoseGraph | None, Metrics]:
    """Run a scripted mapping session to completion."""
    if config.mode == "localization":
        raise ConfigError("localization runs via run_localization")
    session = MappingSession(config)
    records = _drive(session)
    grid, graph, metrics = session.finish()
    return records, grid, graph, metrics


def run_localization(
    config: SessionConfig,
) -> tuple[list[dict[str, Any]], OccupancyGrid, Metrics]:
    """Drive a route while localizing against a previously saved map."""
    if config.mode != "localization":
        raise ConfigError("run_localization requires mode 'localization'")
    if config.route is None:
        raise ConfigError("localization runs need a scripted route")
    session = MappingSession(config)
    records = _drive(session)
    grid, _, metrics = session.finish()
    return records, grid, metrics


def build_known_pose_map(
    world_name: str, route_name: str, seed: int
) -> tuple[OccupancyGrid, float]:
    """Map a scripted route with ground-truth poses and noise-free scans;
    returns the grid and its cell agreement against the rasterized world
    (mapping-only upper bound used to sanity-check the grid model)."""
    route = scripted_route(route_name)
    world = bundled_world(world_name)
    sim = Simulator(world, seed=seed, params=ScanParams(sigma=0.0))
    controller = PurePursuit(route)
    grid = grid_for_world(world)
    update_occupancy(grid, sim.state.true_pose, sim.scan())
    budget = int(route.length() / route.speed / DT * 1.6) + 200
    for _ in range(budget):
        cmd = controller.command(sim.state.true_pose)
        if cmd is None:
            break
        sim.step(cmd, DT)
        update_occupancy(grid, sim.state.true_pose, sim.scan())
    return grid, cell_agreement(grid, world)
