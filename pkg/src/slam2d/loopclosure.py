"""Appearance-based loop closure: range-histogram scan signatures, a bounded
working memory searched per query, and correlative geometric verification."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import distance_transform_edt

from . import kernels
from .geometry import Pose2
from .simworld import LaserScan

DESCRIPTOR_BINS = 64


@dataclass(frozen=True)
class LoopClosureParams:
    gate_recent: int = 30
    sim_threshold: float = 0.92
    max_candidates: int = 3
    wm_capacity: int = 200
    neighbor_radius: int = 5
    verify_threshold: float = 0.6
    min_returns: int = 10
    search_half_xy: float = 0.5
    search_step_xy: float = 0.05
    search_half_theta: float = math.pi / 6.0
    search_step_theta: float = math.pi / 180.0
    raster_resolution: float = 0.05
    raster_sigma: float = 0.1

    def __post_init__(self) -> None:
        if not 0.0 <= self.sim_threshold <= 1.0:
            raise ValueError("sim_threshold must be in [0, 1]")
        if not 0.0 <= self.verify_threshold <= 1.0:
            raise ValueError("verify_threshold must be in [0, 1]")
        if self.wm_capacity < 1 or self.max_candidates < 1:
            raise ValueError("capacities must be positive")


@dataclass(frozen=True)
class ScanDescriptor:
    """Heading-invariant appearance signature: where the returned range mass sits."""

    bins: np.ndarray
    mean_range: float
    empty: bool

    def __post_init__(self) -> None:
        bins = np.asarray(self.bins, dtype=np.float64)
        if bins.shape != (DESCRIPTOR_BINS,):
            raise ValueError(f"descriptor needs {DESCRIPTOR_BINS} bins")
        object.__setattr__(self, "bins", bins)
        bins.setflags(write=False)


def describe(scan: LaserScan) -> ScanDescriptor:
    """Histogram the returned ranges over uniform bins covering (0, range_max]."""
    r = scan.ranges[scan.returned]
    if r.size == 0:
        return ScanDescriptor(np.zeros(DESCRIPTOR_BINS), 0.0, True)
    hist, _ = np.histogram(r, bins=DESCRIPTOR_BINS, range=(0.0, scan.range_max))
    return ScanDescriptor(hist / r.size, float(r.mean()), False)


def cosine_similarity(a: ScanDescriptor, b: ScanDescriptor) -> float:
    if a.empty or b.empty:
        return 0.0
    denom = float(np.linalg.norm(a.bins) * np.linalg.norm(b.bins))
    if denom == 0.0:
        return 0.0
    return float(a.bins @ b.bins / denom)


@dataclass
class MemoryEntry:
    node_id: int
    descriptor: ScanDescriptor
    scan: LaserScan
    last_access: int


class LoopClosureMemory:
    """Working set searched every query; overflow spills to long-term storage.

    Long-term entries are invisible to detection until a hit on a nearby node
    promotes them back, which keeps revisited areas cheap to recognize.
    """

    def __init__(self, params: LoopClosureParams | None = None) -> None:
        self.params = params if params is not None else LoopClosureParams()
        self.working: dict[int, MemoryEntry] = {}
        self.long_term: dict[int, MemoryEntry] = {}
        self._clock = 0

    def __len__(self) -> int:
        return len(self.working) + len(self.long_term)

    def insert(self, node_id: int, descriptor: ScanDescriptor, scan: LaserScan) -> None:
        if node_id in self.working or node_id in self.long_term:
            raise ValueError(f"node {node_id} already stored")
        self._clock += 1
        self.working[node_id] = MemoryEntry(node_id, descriptor, scan, self._clock)
        self._evict_overflow()

    def _evict_overflow(self) -> None:
        while len(self.working) > self.params.wm_capacity:
            lru = min(self.working.values(), key=lambda e: e.last_access)
            self.long_term[lru.node_id] = self.working.pop(lru.node_id)

    def _promote_neighbors(self, node_id: int) -> None:
        radius = self.params.neighbor_radius
        nearby = [nid for nid in self.long_term if abs(nid - node_id) <= radius]
        for nid in nearby:
            self._clock += 1
            entry = self.long_term.pop(nid)
            entry.last_access = self._clock
            self.working[nid] = entry
        self._evict_overflow()

    def scan_for(self, node_id: int) -> LaserScan:
        entry = self.working.get(node_id) or self.long_term.get(node_id)
        if entry is None:
            raise KeyError(f"node {node_id} not stored")
        return entry.scan


def detect(
    memory: LoopClosureMemory, query: ScanDescriptor, current_node: int
) -> list[int]:
    """Candidate old nodes resembling the query, best first, recency-gated."""
    params = memory.params
    memory._clock += 1
    now = memory._clock
    if query.empty:
        return []
    scored = []
    for nid, entry in memory.working.items():
        if nid == current_node or current_node - nid < params.gate_recent:
            continue
        sim = cosine_similarity(query, entry.descriptor)
        if sim >= params.sim_threshold:
            scored.append((-sim, nid))
    scored.sort()
    hits = [nid for _, nid in scored[: params.max_candidates]]
    for nid in hits:
        memory.working[nid].last_access = now
        memory._promote_neighbors(nid)
    return hits


@dataclass(frozen=True)
class LoopConstraint:
    from_id: int
    to_id: int
    relative: Pose2
    score: float

    def __post_init__(self) -> None:
        if self.from_id >= self.to_id:
            raise ValueError("loop constraints run from the older node to the newer")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError("score must be in [0, 1]")


@dataclass(frozen=True)
class ScanMatch:
    relative: Pose2
    score: float


@dataclass(frozen=True)
class VerificationFailure:
    reason: str


def _endpoints(scan: LaserScan) -> tuple[np.ndarray, np.ndarray]:
    bearings = scan.bearings[scan.returned]
    r = scan.ranges[scan.returned]
    return r * np.cos(bearings), r * np.sin(bearings)


def verify(
    scan_a: LaserScan,
    scan_b: LaserScan,
    init: Pose2,
    params: LoopClosureParams | None = None,
) -> ScanMatch | VerificationFailure:
    """Correlative match of b's endpoints against a smoothed raster of a's.

    Searches translations and rotations around init and returns the transform
    placing b's sensor frame in a's, or a failure when the overlap is weak.
    """
    params = params if params is not None else LoopClosureParams()
    n_a = int(scan_a.returned.sum())
    n_b = int(scan_b.returned.sum())
    if min(n_a, n_b) < params.min_returns:
        return VerificationFailure(
            f"too few returns for matching ({min(n_a, n_b)} < {params.min_returns})"
        )
    ax, ay = _endpoints(scan_a)
    res = params.raster_resolution
    pad = 3.0 * params.raster_sigma + params.search_half_xy + res
    ox = float(ax.min()) - pad
    oy = float(ay.min()) - pad
    width = int(math.ceil((float(ax.max()) + pad - ox) / res))
    height = int(math.ceil((float(ay.max()) + pad - oy) / res))
    occupied = np.zeros((height, width), dtype=bool)
    cols = np.floor((ax - ox) / res).astype(np.int64)
    rows = np.floor((ay - oy) / res).astype(np.int64)
    occupied[rows, cols] = True
    dist = distance_transform_edt(~occupied) * res
    raster = np.exp(-0.5 * (dist / params.raster_sigma) ** 2)
    qx, qy = _endpoints(scan_b)
    score, tx, ty, tth = kernels.match_scan(
        np.ascontiguousarray(raster),
        ox,
        oy,
        res,
        np.ascontiguousarray(qx),
        np.ascontiguousarray(qy),
        init.x,
        init.y,
        init.theta,
        params.search_half_xy,
        params.search_step_xy,
        params.search_half_theta,
        params.search_step_theta,
    )
    if score < params.verify_threshold:
        return VerificationFailure(
            f"match score {score:.3f} below threshold {params.verify_threshold}"
        )
    return ScanMatch(Pose2(tx, ty, tth), float(score))
