# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: same contracts as kernels._pure, built for the inner loops."""

from libc.math cimport atan2, ceil, cos, exp, fabs, floor, log, sin, sqrt

import numpy as np

cimport numpy as cnp

cnp.import_array()

DEF PARALLEL_EPS = 1e-12


def raycast(cnp.ndarray segments_arr, double px, double py, cnp.ndarray angles_arr, double range_max):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] segments
    cdef cnp.ndarray[cnp.float64_t, ndim=1] angles = np.ascontiguousarray(angles_arr, dtype=np.float64)
    cdef Py_ssize_t n = angles.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.full(n, np.inf)
    if segments_arr.size == 0:
        return out
    segments = np.ascontiguousarray(segments_arr, dtype=np.float64)
    cdef Py_ssize_t n_seg = segments.shape[0]
    cdef Py_ssize_t i, j
    cdef double dx, dy, ax, ay, ex, ey, apx, apy, denom, t, s, best
    for i in range(n):
        dx = cos(angles[i])
        dy = sin(angles[i])
        best = np.inf
        for j in range(n_seg):
            ax = segments[j, 0]
            ay = segments[j, 1]
            ex = segments[j, 2] - ax
            ey = segments[j, 3] - ay
            denom = dx * ey - dy * ex
            if fabs(denom) <= PARALLEL_EPS:
                continue
            apx = ax - px
            apy = ay - py
            t = (apx * ey - apy * ex) / denom
            s = (apx * dy - apy * dx) / denom
            if t >= 0.0 and s >= 0.0 and s <= 1.0 and t < best:
                best = t
        out[i] = best
    return out


def update_grid(
    cnp.ndarray[cnp.float64_t, ndim=2] cells,
    double ox,
    double oy,
    double res,
    double px,
    double py,
    cnp.ndarray angles_arr,
    cnp.ndarray ranges_arr,
    cnp.ndarray returned_arr,
    double l_free,
    double l_occ,
    double l_min,
    double l_max,
    double occ_threshold,
):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] angles = np.ascontiguousarray(angles_arr, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ranges = np.ascontiguousarray(ranges_arr, dtype=np.float64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] returned = np.ascontiguousarray(returned_arr, dtype=np.uint8)
    cdef Py_ssize_t height = cells.shape[0]
    cdef Py_ssize_t width = cells.shape[1]
    cdef Py_ssize_t n = angles.shape[0]
    # worst case touched cells: full diagonal per beam plus endpoint
    cdef Py_ssize_t cap = n * (width + height + 2) + 1
    cdef cnp.ndarray[cnp.intp_t, ndim=1] tflat = np.empty(cap, dtype=np.intp)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] tinc = np.empty(cap, dtype=np.float64)
    cdef Py_ssize_t n_touch = 0
    cdef Py_ssize_t rc = <Py_ssize_t> floor((px - ox) / res)
    cdef Py_ssize_t rr = <Py_ssize_t> floor((py - oy) / res)
    cdef Py_ssize_t i, ec, er, c, r, dc, dr, sc, sr, err, e2
    cdef double exw, eyw
    for i in range(n):
        exw = px + ranges[i] * cos(angles[i])
        eyw = py + ranges[i] * sin(angles[i])
        ec = <Py_ssize_t> floor((exw - ox) / res)
        er = <Py_ssize_t> floor((eyw - oy) / res)
        # walk Bresenham from the robot cell; mark strictly-interior cells free
        dc = ec - rc
        if dc < 0:
            dc = -dc
        dr = er - rr
        if dr < 0:
            dr = -dr
        dr = -dr
        sc = 1 if rc < ec else -1
        sr = 1 if rr < er else -1
        err = dc + dr
        c = rc
        r = rr
        while True:
            if not (c == rc and r == rr):
                # interior cell (endpoint excluded below by loop exit order)
                if c < 0 or c >= width or r < 0 or r >= height:
                    break
                tflat[n_touch] = r * width + c
                tinc[n_touch] = l_free
                n_touch += 1
            if c == ec and r == er:
                if not (c == rc and r == rr):
                    n_touch -= 1  # drop the endpoint from the free pass
                break
            e2 = 2 * err
            if e2 >= dr:
                err += dr
                c += sc
            if e2 <= dc:
                err += dc
                r += sr
        if returned[i] and 0 <= ec < width and 0 <= er < height:
            tflat[n_touch] = er * width + ec
            tinc[n_touch] = l_occ
            n_touch += 1
    if n_touch == 0:
        return 0
    assert cnp.PyArray_IS_C_CONTIGUOUS(cells)
    flat = tflat[:n_touch]
    uniq = np.unique(flat)
    cells_flat = cells.reshape(-1)
    before_occ = cells_flat[uniq] > occ_threshold
    cdef cnp.ndarray[cnp.float64_t, ndim=1] flat_view = cells_flat
    cdef cnp.ndarray[cnp.intp_t, ndim=1] fidx = flat
    cdef Py_ssize_t k
    for k in range(n_touch):
        flat_view[fidx[k]] = flat_view[fidx[k]] + tinc[k]
    cdef cnp.ndarray[cnp.intp_t, ndim=1] uidx = uniq
    cdef Py_ssize_t nu = uidx.shape[0]
    cdef double v
    for k in range(nu):
        v = flat_view[uidx[k]]
        if v < l_min:
            flat_view[uidx[k]] = l_min
        elif v > l_max:
            flat_view[uidx[k]] = l_max
    after_occ = cells_flat[uniq] > occ_threshold
    return int(np.count_nonzero(before_occ != after_occ))


def scan_loglik(
    cnp.ndarray[cnp.float64_t, ndim=2] cells,
    cnp.ndarray[cnp.float64_t, ndim=2] edt_m,
    double ox,
    double oy,
    double res,
    double px,
    double py,
    double ptheta,
    cnp.ndarray bearings_arr,
    cnp.ndarray ranges_arr,
    cnp.ndarray returned_arr,
    double z_hit,
    double sigma_hit,
    double z_rand,
    double range_max,
):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] bearings = np.ascontiguousarray(bearings_arr, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ranges = np.ascontiguousarray(ranges_arr, dtype=np.float64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] returned = np.ascontiguousarray(returned_arr, dtype=np.uint8)
    cdef Py_ssize_t height = cells.shape[0]
    cdef Py_ssize_t width = cells.shape[1]
    cdef Py_ssize_t n = bearings.shape[0]
    cdef double floor_lik = z_rand / range_max
    cdef double norm = 1.0 / (sigma_hit * sqrt(2.0 * 3.141592653589793))
    cdef double total = 0.0
    cdef Py_ssize_t n_used = 0
    cdef Py_ssize_t i, col, row
    cdef double exw, eyw, d, lik
    for i in range(n):
        if not returned[i]:
            continue
        n_used += 1
        exw = px + ranges[i] * cos(ptheta + bearings[i])
        eyw = py + ranges[i] * sin(ptheta + bearings[i])
        col = <Py_ssize_t> floor((exw - ox) / res)
        row = <Py_ssize_t> floor((eyw - oy) / res)
        if col < 0 or col >= width or row < 0 or row >= height or cells[row, col] == 0.0:
            lik = floor_lik
        else:
            d = edt_m[row, col]
            lik = z_hit * (norm * exp(-0.5 * (d / sigma_hit) * (d / sigma_hit))) + floor_lik
        total += log(lik)
    return total, int(n_used)


def match_scan(
    cnp.ndarray[cnp.float64_t, ndim=2] raster,
    double ox,
    double oy,
    double res,
    cnp.ndarray qx_arr,
    cnp.ndarray qy_arr,
    double cx,
    double cy,
    double cth,
    double half_xy,
    double step_xy,
    double half_th,
    double step_th,
):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] qx = np.ascontiguousarray(qx_arr, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] qy = np.ascontiguousarray(qy_arr, dtype=np.float64)
    cdef Py_ssize_t height = raster.shape[0]
    cdef Py_ssize_t width = raster.shape[1]
    cdef Py_ssize_t n_pts = qx.shape[0]
    cdef Py_ssize_t n_xy = <Py_ssize_t> floor(half_xy / step_xy + 0.5)
    cdef Py_ssize_t n_th = <Py_ssize_t> floor(half_th / step_th + 0.5)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] base_x = np.empty(n_pts)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] base_y = np.empty(n_pts)
    cdef double best_score = -1.0
    cdef double bx = cx, by = cy, bth = cth
    cdef Py_ssize_t it, iy, ix, k, col, row
    cdef double dth, th, ct, st, offx, offy, acc, score, gx, gy
    for it in range(-n_th, n_th + 1):
        dth = it * step_th
        th = cth + dth
        ct = cos(th)
        st = sin(th)
        # addition order (cx + rotated) + offset is load-bearing: floor() at
        # cell boundaries must agree with the fallback backend
        for k in range(n_pts):
            base_x[k] = cx + (ct * qx[k] - st * qy[k])
            base_y[k] = cy + (st * qx[k] + ct * qy[k])
        for iy in range(-n_xy, n_xy + 1):
            offy = iy * step_xy
            for ix in range(-n_xy, n_xy + 1):
                offx = ix * step_xy
                acc = 0.0
                for k in range(n_pts):
                    gx = base_x[k] + offx
                    gy = base_y[k] + offy
                    col = <Py_ssize_t> floor((gx - ox) / res)
                    row = <Py_ssize_t> floor((gy - oy) / res)
                    if 0 <= col < width and 0 <= row < height:
                        acc += raster[row, col]
                score = acc / n_pts
                if score > best_score:
                    best_score = score
                    bx = cx + offx
                    by = cy + offy
                    bth = th
    return best_score, bx, by, bth
