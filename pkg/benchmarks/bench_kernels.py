"""Compare the compiled kernel backend against the pure-NumPy fallback.

Runs each kernel on workloads taken from a live mapping session (kitchen
world, 360-beam scans) and reports per-call medians plus the speedup. Output
agreement is checked at the same time, so a silent divergence between
backends fails loudly here too.

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

from __future__ import annotations

import argparse
import math
import statistics
import time

import numpy as np
from scipy.ndimage import distance_transform_edt

from slam2d.fastslam import FastSlamConfig
from slam2d.geometry import Twist
from slam2d.gridmap import (
    L_FREE,
    L_MAX,
    L_MIN,
    L_OCC,
    OCCUPIED_LOGODDS,
    grid_for_world,
    occupied_distance_map,
    update_occupancy,
)
from slam2d.kernels import _core, _pure
from slam2d.simworld import Simulator, bundled_world


def check_close(a, b) -> None:
    np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12)


def check_loglik(a, b) -> None:
    np.testing.assert_allclose(a[0], b[0], rtol=1e-9)
    assert a[1] == b[1], (a, b)


def check_exact(a, b) -> None:
    assert a == b, (a, b)


def mapping_inputs():
    """One representative pose, scan, and grid from a short kitchen drive."""
    world = bundled_world("kitchen_dining")
    sim = Simulator(world, seed=12)
    grid = grid_for_world(world)
    for _ in range(80):
        sim.step(Twist(0.5, 0.2), 0.1)
        update_occupancy(grid, sim.state.true_pose, sim.scan())
    pose = sim.state.true_pose
    scan = sim.scan()
    return world, grid, pose, scan


def bench(fn, repeats: int) -> tuple[float, object]:
    fn()  # warm up caches and JIT-free paths alike
    times = []
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times), result


def compare(name: str, make_args, repeats: int, check) -> None:
    args_pure = make_args()
    args_core = make_args()
    t_pure, r_pure = bench(lambda: _pure.__dict__[name](*args_pure), repeats)
    t_core, r_core = bench(lambda: _core.__dict__[name](*args_core), repeats)
    check(r_pure, r_core)
    speedup = t_pure / t_core if t_core > 0 else float("inf")
    print(
        f"{name:<12} pure {t_pure * 1e3:8.3f} ms   "
        f"cython {t_core * 1e3:8.3f} ms   x{speedup:5.1f}"
    )


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    world, grid, pose, scan = mapping_inputs()
    angles = scan.angle_min + scan.angle_increment * np.arange(scan.n_beams)
    cfg = FastSlamConfig()
    edt = occupied_distance_map(grid)

    print(f"workload: {world.name}, grid {grid.cells.shape}, {scan.n_beams} beams, "
          f"median of {args.repeats}")

    compare(
        "raycast",
        lambda: (world.segments, pose.x, pose.y, pose.theta + angles, scan.range_max),
        args.repeats,
        check_close,
    )

    compare(
        "update_grid",
        lambda: (
            grid.cells.copy(),
            grid.origin.x,
            grid.origin.y,
            grid.resolution,
            pose.x,
            pose.y,
            pose.theta + angles,
            scan.ranges,
            scan.returned.astype(np.uint8),
            L_FREE,
            L_OCC,
            L_MIN,
            L_MAX,
            OCCUPIED_LOGODDS,
        ),
        args.repeats,
        check_exact,
    )

    compare(
        "scan_loglik",
        lambda: (
            grid.cells,
            edt,
            grid.origin.x,
            grid.origin.y,
            grid.resolution,
            pose.x,
            pose.y,
            pose.theta,
            angles,
            scan.ranges,
            scan.returned,
            cfg.z_hit,
            cfg.sigma_hit,
            cfg.z_rand,
            scan.range_max,
        ),
        args.repeats,
        check_loglik,
    )

    # correlative search raster mirrors the loop-closure verifier's inputs
    returned = scan.returned.astype(bool)
    ex = pose.x + scan.ranges[returned] * np.cos(pose.theta + angles[returned])
    ey = pose.y + scan.ranges[returned] * np.sin(pose.theta + angles[returned])
    res = 0.05
    pad = 1.0
    ox, oy = float(ex.min()) - pad, float(ey.min()) - pad
    width = int(math.ceil((float(ex.max()) + pad - ox) / res))
    height = int(math.ceil((float(ey.max()) + pad - oy) / res))
    occupied = np.zeros((height, width), dtype=bool)
    occupied[
        np.floor((ey - oy) / res).astype(np.int64),
        np.floor((ex - ox) / res).astype(np.int64),
    ] = True
    raster = np.exp(-0.5 * (distance_transform_edt(~occupied) * res / 0.1) ** 2)
    qx = scan.ranges[returned] * np.cos(angles[returned])
    qy = scan.ranges[returned] * np.sin(angles[returned])

    compare(
        "match_scan",
        lambda: (
            raster,
            ox,
            oy,
            res,
            qx,
            qy,
            pose.x,
            pose.y,
            pose.theta,
            0.5,
            0.05,
            0.35,
            0.025,
        ),
        args.repeats,
        check_close,
    )


if __name__ == "__main__":
    main()
