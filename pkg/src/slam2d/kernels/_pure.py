"""Pure NumPy fallback for the hot kernels.

Semantics here are the contract; the compiled backend in ``_core.pyx`` mirrors
these functions operation-for-operation. Integer work (cell traversal, index
math) is bit-identical across backends; floating-point reductions may differ in
the last ulp because numpy uses pairwise summation.
"""

from __future__ import annotations

import math

import numpy as np

_PARALLEL_EPS = 1e-12


def raycast(segments: np.ndarray, px: float, py: float, angles: np.ndarray, range_max: float) -> np.ndarray:
    """Distance from (px, py) to the nearest segment along each angle.

    Returns +inf where a ray hits nothing. ``range_max`` is not applied here;
    the caller decides how to clamp/flag.
    """
    n = angles.shape[0]
    if segments.size == 0:
        return np.full(n, np.inf)
    ax = segments[:, 0]
    ay = segments[:, 1]
    ex = segments[:, 2] - ax
    ey = segments[:, 3] - ay
    dx = np.cos(angles)[:, None]
    dy = np.sin(angles)[:, None]
    apx = (ax - px)[None, :]
    apy = (ay - py)[None, :]
    denom = dx * ey[None, :] - dy * ex[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (apx * ey[None, :] - apy * ex[None, :]) / denom
        s = (apx * dy - apy * dx) / denom
    valid = (np.abs(denom) > _PARALLEL_EPS) & (t >= 0.0) & (s >= 0.0) & (s <= 1.0)
    t = np.where(valid, t, np.inf)
    return np.min(t, axis=1)


def _bresenham_cells(c0: int, r0: int, c1: int, r1: int) -> list[tuple[int, int]]:
    """All integer cells on the line from (c0, r0) to (c1, r1), endpoints included."""
    cells = []
    dc = abs(c1 - c0)
    dr = -abs(r1 - r0)
    sc = 1 if c0 < c1 else -1
    sr = 1 if r0 < r1 else -1
    err = dc + dr
    c, r = c0, r0
    while True:
        cells.append((c, r))
        if c == c1 and r == r1:
            break
        e2 = 2 * err
        if e2 >= dr:
            err += dr
            c += sc
        if e2 <= dc:
            err += dc
            r += sr
    return cells


def update_grid(
    cells: np.ndarray,
    ox: float,
    oy: float,
    res: float,
    px: float,
    py: float,
    angles: np.ndarray,
    ranges: np.ndarray,
    returned: np.ndarray,
    l_free: float,
    l_occ: float,
    l_min: float,
    l_max: float,
    occ_threshold: float,
) -> int:
    """Inverse sensor model update, in place.

    Per beam: cells strictly between the robot cell and the endpoint cell get
    += l_free; the endpoint cell gets += l_occ unless the beam is a no-return.
    Rays are truncated at the grid boundary. All increments of one call are
    accumulated before a single clamp to [l_min, l_max].

    Returns the number of cells whose occupied-class (value > occ_threshold)
    changed, so callers can invalidate distance-transform caches.
    """
    height, width = cells.shape
    rc = int(math.floor((px - ox) / res))
    rr = int(math.floor((py - oy) / res))
    touched_rows: list[int] = []
    touched_cols: list[int] = []
    incs: list[float] = []
    n = angles.shape[0]
    for i in range(n):
        exw = px + ranges[i] * math.cos(angles[i])
        eyw = py + ranges[i] * math.sin(angles[i])
        ec = int(math.floor((exw - ox) / res))
        er = int(math.floor((eyw - oy) / res))
        line = _bresenham_cells(rc, rr, ec, er)
        for j in range(1, len(line) - 1):
            c, r = line[j]
            if c < 0 or c >= width or r < 0 or r >= height:
                break
            touched_cols.append(c)
            touched_rows.append(r)
            incs.append(l_free)
        if returned[i] and 0 <= ec < width and 0 <= er < height:
            touched_cols.append(ec)
            touched_rows.append(er)
            incs.append(l_occ)
    if not incs:
        return 0
    assert cells.flags.c_contiguous
    flat_view = cells.reshape(-1)
    rows = np.asarray(touched_rows, dtype=np.intp)
    cols = np.asarray(touched_cols, dtype=np.intp)
    flat = rows * width + cols
    uniq = np.unique(flat)
    before_occ = flat_view[uniq] > occ_threshold
    np.add.at(flat_view, flat, np.asarray(incs))
    flat_view[uniq] = np.clip(flat_view[uniq], l_min, l_max)
    after_occ = flat_view[uniq] > occ_threshold
    return int(np.count_nonzero(before_occ != after_occ))


def scan_loglik(
    cells: np.ndarray,
    edt_m: np.ndarray,
    ox: float,
    oy: float,
    res: float,
    px: float,
    py: float,
    ptheta: float,
    bearings: np.ndarray,
    ranges: np.ndarray,
    returned: np.ndarray,
    z_hit: float,
    sigma_hit: float,
    z_rand: float,
    range_max: float,
) -> tuple[float, int]:
    """Likelihood-field log score of beam endpoints against an occupancy grid.

    Only beams with a return contribute. Endpoints off the grid or in
    never-observed cells (log-odds exactly 0) contribute the uniform floor
    z_rand / range_max. Returns (log likelihood, number of beams used).
    """
    height, width = cells.shape
    floor_lik = z_rand / range_max
    mask = returned.astype(bool)
    n_used = int(np.count_nonzero(mask))
    if n_used == 0:
        return 0.0, 0
    b = bearings[mask]
    r = ranges[mask]
    exw = px + r * np.cos(ptheta + b)
    eyw = py + r * np.sin(ptheta + b)
    col = np.floor((exw - ox) / res).astype(np.int64)
    row = np.floor((eyw - oy) / res).astype(np.int64)
    inb = (col >= 0) & (col < width) & (row >= 0) & (row < height)
    colc = np.where(inb, col, 0)
    rowc = np.where(inb, row, 0)
    known = inb & (cells[rowc, colc] != 0.0)
    d = edt_m[rowc, colc]
    norm = 1.0 / (sigma_hit * math.sqrt(2.0 * math.pi))
    gauss = norm * np.exp(-0.5 * (d / sigma_hit) ** 2)
    lik = np.where(known, z_hit * gauss + floor_lik, floor_lik)
    return float(np.sum(np.log(lik))), n_used


def match_scan(
    raster: np.ndarray,
    ox: float,
    oy: float,
    res: float,
    qx: np.ndarray,
    qy: np.ndarray,
    cx: float,
    cy: float,
    cth: float,
    half_xy: float,
    step_xy: float,
    half_th: float,
    step_th: float,
) -> tuple[float, float, float, float]:
    """Exhaustive correlative search for the transform maximizing mean raster score.

    Candidates are (cx+dx, cy+dy, cth+dth) on the regular grid spanned by
    (half_xy, step_xy) and (half_th, step_th). Query points are mapped by each
    candidate; points outside the raster score 0. Ties keep the first candidate
    in (theta, y, x) scan order. Returns (score, tx, ty, tth).
    """
    height, width = raster.shape
    n_xy = int(math.floor(half_xy / step_xy + 0.5))
    n_th = int(math.floor(half_th / step_th + 0.5))
    offs_xy = np.arange(-n_xy, n_xy + 1) * step_xy
    offs_th = np.arange(-n_th, n_th + 1) * step_th
    n_pts = qx.shape[0]
    best_score = -1.0
    best = (cx, cy, cth)
    for dth in offs_th:
        th = cth + dth
        ct = math.cos(th)
        st = math.sin(th)
        rx = ct * qx - st * qy
        ry = st * qx + ct * qy
        # (ny, nx, npts) candidate endpoint grids
        gx = cx + rx[None, None, :] + offs_xy[None, :, None]
        gy = cy + ry[None, None, :] + offs_xy[:, None, None]
        col = np.floor((gx - ox) / res).astype(np.int64)
        row = np.floor((gy - oy) / res).astype(np.int64)
        inb = (col >= 0) & (col < width) & (row >= 0) & (row < height)
        vals = np.where(inb, raster[np.where(inb, row, 0), np.where(inb, col, 0)], 0.0)
        scores = vals.sum(axis=2) / n_pts
        iy, ix = np.unravel_index(np.argmax(scores), scores.shape)
        s = float(scores[iy, ix])
        if s > best_score:
            best_score = s
            best = (cx + float(offs_xy[ix]), cy + float(offs_xy[iy]), th)
    return best_score, best[0], best[1], best[2]
