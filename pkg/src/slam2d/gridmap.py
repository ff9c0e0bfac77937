"""Log-odds occupancy grid: inverse sensor model updates and derived views."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import distance_transform_edt

from . import kernels
from .geometry import Pose2
from .simworld import LaserScan, WorldModel

L_OCC = 0.875
L_FREE = -0.75
L_MIN = -4.0
L_MAX = 4.0
OCCUPIED_P = 0.65
FREE_P = 0.196
OCCUPIED_LOGODDS = math.log(OCCUPIED_P / (1.0 - OCCUPIED_P))
FREE_LOGODDS = math.log(FREE_P / (1.0 - FREE_P))
DEFAULT_RESOLUTION = 0.05
# half-cell beyond 1 m so axis-aligned walls at coarse coordinates sit mid-cell
GRID_MARGIN = 1.025

CLASS_UNKNOWN = 0
CLASS_FREE = 1
CLASS_OCCUPIED = 2


@dataclass(eq=False)
class OccupancyGrid:
    """Row-major log-odds grid; cell (0, 0) covers the square at origin."""

    resolution: float
    origin: Pose2
    cells: np.ndarray

    def __post_init__(self) -> None:
        if self.resolution <= 0.0:
            raise ValueError("resolution must be positive")
        if self.origin.theta != 0.0:
            raise ValueError("grid origin must be axis-aligned (theta 0)")
        cells = np.ascontiguousarray(np.asarray(self.cells, dtype=np.float64))
        if cells.ndim != 2:
            raise ValueError("cells must be a 2D array")
        self.cells = cells

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(self.resolution, self.origin, self.cells.copy())

    def world_to_cell(self, x: float, y: float) -> tuple[int, int] | None:
        """Map a world point to (col, row), or None when off the grid."""
        col = math.floor((x - self.origin.x) / self.resolution)
        row = math.floor((y - self.origin.y) / self.resolution)
        if 0 <= col < self.width and 0 <= row < self.height:
            return col, row
        return None

    def cell_center(self, col: int, row: int) -> tuple[float, float]:
        return (
            self.origin.x + (col + 0.5) * self.resolution,
            self.origin.y + (row + 0.5) * self.resolution,
        )

    def probabilities(self) -> np.ndarray:
        return cell_probability(self.cells)

    def classes(self) -> np.ndarray:
        """Per-cell class: 0 unknown, 1 free, 2 occupied."""
        out = np.full(self.cells.shape, CLASS_UNKNOWN, dtype=np.int8)
        out[self.cells < FREE_LOGODDS] = CLASS_FREE
        out[self.cells > OCCUPIED_LOGODDS] = CLASS_OCCUPIED
        return out

    def observed_mask(self) -> np.ndarray:
        return self.cells != 0.0


def cell_probability(logodds):
    """Occupancy probability of a log-odds value (scalar or array)."""
    return 1.0 - 1.0 / (1.0 + np.exp(logodds))


def grid_for_world(
    world: WorldModel,
    resolution: float = DEFAULT_RESOLUTION,
    margin: float = GRID_MARGIN,
) -> OccupancyGrid:
    """All-unknown grid covering the world bounds plus a margin on every side."""
    xmin, ymin, xmax, ymax = world.bounds
    width = math.ceil((xmax - xmin + 2.0 * margin) / resolution)
    height = math.ceil((ymax - ymin + 2.0 * margin) / resolution)
    origin = Pose2(xmin - margin, ymin - margin, 0.0)
    return OccupancyGrid(resolution, origin, np.zeros((height, width)))


def update_occupancy(grid: OccupancyGrid, pose: Pose2, scan: LaserScan) -> int:
    """Apply one scan from a pose, in place.

    Beams mark traversed cells free and the endpoint cell occupied (no-return
    beams skip the endpoint); increments accumulate, then clamp once. Returns
    how many cells changed occupied-class, for distance-map cache invalidation.
    """
    if grid.world_to_cell(pose.x, pose.y) is None:
        raise ValueError("pose lies outside the grid")
    if scan.n_beams == 0:
        return 0
    return kernels.update_grid(
        grid.cells,
        grid.origin.x,
        grid.origin.y,
        grid.resolution,
        pose.x,
        pose.y,
        np.asarray(pose.theta + scan.bearings),
        scan.ranges,
        scan.returned.astype(np.uint8),
        L_FREE,
        L_OCC,
        L_MIN,
        L_MAX,
        OCCUPIED_LOGODDS,
    )


def occupied_distance_map(grid: OccupancyGrid) -> np.ndarray:
    """Per-cell distance (meters) to the nearest occupied-class cell.

    A grid with no occupied cells yields +inf everywhere, which drives
    likelihood-field lookups to their uniform floor.
    """
    occ = grid.cells > OCCUPIED_LOGODDS
    if not occ.any():
        return np.full(grid.cells.shape, np.inf)
    return distance_transform_edt(~occ) * grid.resolution


def rasterize_world(world: WorldModel, grid: OccupancyGrid) -> np.ndarray:
    """Ground-truth occupied mask: cells touched by any wall segment.

    Samples each segment at quarter-cell steps under the same floor()
    cell convention the sensor updates use.
    """
    occ = np.zeros(grid.cells.shape, dtype=bool)
    step = grid.resolution / 4.0
    for x1, y1, x2, y2 in world.segments:
        length = math.hypot(x2 - x1, y2 - y1)
        n = max(2, int(math.ceil(length / step)) + 1)
        ts = np.linspace(0.0, 1.0, n)
        xs = x1 + ts * (x2 - x1)
        ys = y1 + ts * (y2 - y1)
        cols = np.floor((xs - grid.origin.x) / grid.resolution).astype(np.int64)
        rows = np.floor((ys - grid.origin.y) / grid.resolution).astype(np.int64)
        ok = (cols >= 0) & (cols < grid.width) & (rows >= 0) & (rows < grid.height)
        occ[rows[ok], cols[ok]] = True
    return occ
