"""Kernel backends: analytic oracles plus cross-backend parity."""

import importlib
import math

import numpy as np
import pytest

from slam2d.kernels import _pure

try:
    from slam2d.kernels import _core
except ImportError:  # pragma: no cover - compiled core should exist in CI
    _core = None

BACKENDS = [_pure] + ([_core] if _core is not None else [])
IDS = ["pure"] + (["cython"] if _core is not None else [])

L_FREE = -0.75
L_OCC = 0.875
L_MIN = -4.0
L_MAX = 4.0
OCC_T = 0.6190392084062235


@pytest.fixture(params=BACKENDS, ids=IDS)
def backend(request):
    return request.param


def square_room(half: float = 2.0) -> np.ndarray:
    h = half
    return np.array(
        [
            [-h, -h, h, -h],
            [h, -h, h, h],
            [h, h, -h, h],
            [-h, h, -h, -h],
        ]
    )


class TestRaycast:
    def test_axis_aligned_hits(self, backend) -> None:
        segs = square_room(2.0)
        angles = np.array([0.0, math.pi / 2, math.pi, -math.pi / 2])
        d = backend.raycast(segs, 0.0, 0.0, angles, 8.0)
        assert d == pytest.approx([2.0, 2.0, 2.0, 2.0])

    def test_diagonal_hit(self, backend) -> None:
        segs = square_room(2.0)
        d = backend.raycast(segs, 0.0, 0.0, np.array([math.pi / 4]), 8.0)
        assert d[0] == pytest.approx(2.0 * math.sqrt(2.0))

    def test_offset_origin(self, backend) -> None:
        segs = square_room(2.0)
        d = backend.raycast(segs, 1.0, 0.5, np.array([0.0, math.pi]), 8.0)
        assert d == pytest.approx([1.0, 3.0])

    def test_miss_is_inf(self, backend) -> None:
        segs = np.array([[2.0, 1.0, 2.0, 2.0]])
        d = backend.raycast(segs, 0.0, 0.0, np.array([0.0]), 8.0)
        assert np.isinf(d[0])

    def test_behind_ray_is_inf(self, backend) -> None:
        segs = np.array([[-2.0, -1.0, -2.0, 1.0]])
        d = backend.raycast(segs, 0.0, 0.0, np.array([0.0]), 8.0)
        assert np.isinf(d[0])

    def test_parallel_ray_is_inf(self, backend) -> None:
        segs = np.array([[0.0, 1.0, 5.0, 1.0]])
        d = backend.raycast(segs, 0.0, 0.0, np.array([0.0]), 8.0)
        assert np.isinf(d[0])

    def test_nearest_of_two(self, backend) -> None:
        segs = np.array([[3.0, -1.0, 3.0, 1.0], [1.5, -1.0, 1.5, 1.0]])
        d = backend.raycast(segs, 0.0, 0.0, np.array([0.0]), 8.0)
        assert d[0] == pytest.approx(1.5)

    def test_no_segments(self, backend) -> None:
        d = backend.raycast(np.empty((0, 4)), 0.0, 0.0, np.array([0.0, 1.0]), 8.0)
        assert np.all(np.isinf(d))

    def test_parity_random(self) -> None:
        if _core is None:
            pytest.skip("compiled core unavailable")
        rng = np.random.default_rng(7)
        for _ in range(20):
            segs = rng.uniform(-5.0, 5.0, size=(12, 4))
            angles = rng.uniform(-math.pi, math.pi, size=90)
            px, py = rng.uniform(-1.0, 1.0, size=2)
            a = _pure.raycast(segs, px, py, angles, 8.0)
            b = _core.raycast(segs, px, py, angles, 8.0)
            np.testing.assert_array_equal(a, b)


class TestUpdateGrid:
    def grid(self, n: int = 40) -> np.ndarray:
        return np.zeros((n, n))

    def test_single_beam_marks_interior_free_endpoint_occupied(self, backend) -> None:
        cells = self.grid()
        # robot centered in cell (0, 10); beam along +x of one metre spans 20 cells
        backend.update_grid(
            cells, 0.0, 0.0, 0.05, 0.025, 0.525,
            np.array([0.0]), np.array([1.0]), np.array([1], dtype=np.uint8),
            L_FREE, L_OCC, L_MIN, L_MAX, OCC_T,
        )
        assert cells[10, 0] == 0.0
        assert np.all(cells[10, 1:20] == L_FREE)
        assert cells[10, 20] == L_OCC
        assert np.count_nonzero(cells) == 20

    def test_no_return_beam_skips_endpoint(self, backend) -> None:
        cells = self.grid()
        backend.update_grid(
            cells, 0.0, 0.0, 0.05, 0.025, 0.525,
            np.array([0.0]), np.array([1.0]), np.array([0], dtype=np.uint8),
            L_FREE, L_OCC, L_MIN, L_MAX, OCC_T,
        )
        assert cells[10, 20] == 0.0
        assert np.all(cells[10, 1:20] == L_FREE)

    def test_clamped_after_accumulation(self, backend) -> None:
        cells = self.grid()
        args = (
            0.0, 0.0, 0.05, 0.025, 0.525,
            np.array([0.0]), np.array([1.0]), np.array([1], dtype=np.uint8),
            L_FREE, L_OCC, L_MIN, L_MAX, OCC_T,
        )
        for _ in range(12):
            backend.update_grid(cells, *args)
        assert cells[10, 20] == L_MAX
        assert cells[10, 5] == L_MIN

    def test_beam_leaving_grid_truncated(self, backend) -> None:
        cells = self.grid(10)
        backend.update_grid(
            cells, 0.0, 0.0, 0.05, 0.025, 0.275,
            np.array([0.0]), np.array([5.0]), np.array([1], dtype=np.uint8),
            L_FREE, L_OCC, L_MIN, L_MAX, OCC_T,
        )
        # endpoint is far off-grid: free marks stop at the boundary, no occ mark
        assert np.all(cells[5, 1:10] == L_FREE)
        assert np.count_nonzero(cells) == 9

    def test_returns_occupied_class_transitions(self, backend) -> None:
        cells = self.grid()
        args = (
            0.0, 0.0, 0.05, 0.025, 0.525,
            np.array([0.0]), np.array([1.0]), np.array([1], dtype=np.uint8),
            L_FREE, L_OCC, L_MIN, L_MAX, OCC_T,
        )
        assert backend.update_grid(cells, *args) == 1
        assert backend.update_grid(cells, *args) == 0

    def test_beam_order_does_not_change_grid(self, backend) -> None:
        rng = np.random.default_rng(11)
        angles = rng.uniform(-math.pi, math.pi, size=60)
        ranges = rng.uniform(0.3, 1.8, size=60)
        returned = (rng.uniform(size=60) < 0.8).astype(np.uint8)
        a = self.grid(80)
        b = self.grid(80)
        perm = rng.permutation(60)
        backend.update_grid(
            a, -2.0, -2.0, 0.05, 0.0, 0.0, angles, ranges, returned,
            L_FREE, L_OCC, L_MIN, L_MAX, OCC_T,
        )
        backend.update_grid(
            b, -2.0, -2.0, 0.05, 0.0, 0.0, angles[perm], ranges[perm], returned[perm],
            L_FREE, L_OCC, L_MIN, L_MAX, OCC_T,
        )
        np.testing.assert_array_equal(a, b)

    def test_parity_random(self) -> None:
        if _core is None:
            pytest.skip("compiled core unavailable")
        rng = np.random.default_rng(23)
        for _ in range(10):
            angles = rng.uniform(-math.pi, math.pi, size=72)
            ranges = rng.uniform(0.1, 6.0, size=72)
            returned = (rng.uniform(size=72) < 0.85).astype(np.uint8)
            px, py = rng.uniform(-0.5, 0.5, size=2)
            a = np.zeros((120, 100))
            b = np.zeros((120, 100))
            na = _pure.update_grid(
                a, -3.0, -3.0, 0.05, px, py, angles, ranges, returned,
                L_FREE, L_OCC, L_MIN, L_MAX, OCC_T,
            )
            nb = _core.update_grid(
                b, -3.0, -3.0, 0.05, px, py, angles, ranges, returned,
                L_FREE, L_OCC, L_MIN, L_MAX, OCC_T,
            )
            np.testing.assert_array_equal(a, b)
            assert na == nb


class TestScanLoglik:
    def setup_field(self) -> tuple[np.ndarray, np.ndarray]:
        cells = np.zeros((40, 40))
        cells[20, 30] = L_MAX
        cells[10:31, 5:36] = np.where(cells[10:31, 5:36] == 0.0, -1.0, cells[10:31, 5:36])
        cells[20, 30] = L_MAX
        occ = cells > OCC_T
        from scipy.ndimage import distance_transform_edt

        d = distance_transform_edt(~occ) * 0.05
        return cells, d

    def test_endpoint_on_obstacle_beats_offset(self, backend) -> None:
        cells, edt = self.setup_field()
        # obstacle cell (20, 30) centre is (1.525, 1.025)
        common = (cells, edt, 0.0, 0.0, 0.05, 0.5, 1.025, 0.0)
        on, n_on = backend.scan_loglik(
            *common, np.array([0.0]), np.array([1.025]), np.array([1], dtype=np.uint8),
            0.9, 0.2, 0.1, 8.0,
        )
        off, n_off = backend.scan_loglik(
            *common, np.array([0.0]), np.array([0.725]), np.array([1], dtype=np.uint8),
            0.9, 0.2, 0.1, 8.0,
        )
        assert n_on == 1 and n_off == 1
        assert on > off

    def test_exact_value_on_obstacle(self, backend) -> None:
        cells, edt = self.setup_field()
        ll, _ = backend.scan_loglik(
            cells, edt, 0.0, 0.0, 0.05, 0.5, 1.025, 0.0,
            np.array([0.0]), np.array([1.025]), np.array([1], dtype=np.uint8),
            0.9, 0.2, 0.1, 8.0,
        )
        expect = math.log(0.9 / (0.2 * math.sqrt(2.0 * math.pi)) + 0.1 / 8.0)
        assert ll == pytest.approx(expect, abs=1e-12)

    def test_unknown_cell_scores_floor(self, backend) -> None:
        cells, edt = self.setup_field()
        # (0.075, 0.075) falls in a never-observed cell with log-odds 0
        ll, n = backend.scan_loglik(
            cells, edt, 0.0, 0.0, 0.05, 0.5, 1.0, 0.0,
            np.array([math.pi]), np.array([0.425]), np.array([1], dtype=np.uint8),
            0.9, 0.2, 0.1, 8.0,
        )
        assert cells[20, 1] == 0.0
        assert n == 1
        assert ll == pytest.approx(math.log(0.1 / 8.0), abs=1e-12)

    def test_off_grid_scores_floor(self, backend) -> None:
        cells, edt = self.setup_field()
        ll, n = backend.scan_loglik(
            cells, edt, 0.0, 0.0, 0.05, 1.0, 1.0, 0.0,
            np.array([math.pi]), np.array([5.0]), np.array([1], dtype=np.uint8),
            0.9, 0.2, 0.1, 8.0,
        )
        assert n == 1
        assert ll == pytest.approx(math.log(0.1 / 8.0), abs=1e-12)

    def test_no_return_beams_excluded(self, backend) -> None:
        cells, edt = self.setup_field()
        ll, n = backend.scan_loglik(
            cells, edt, 0.0, 0.0, 0.05, 0.5, 1.0, 0.0,
            np.array([0.0, 1.0]), np.array([1.0, 2.0]), np.array([1, 0], dtype=np.uint8),
            0.9, 0.2, 0.1, 8.0,
        )
        assert n == 1

    def test_all_no_return(self, backend) -> None:
        cells, edt = self.setup_field()
        ll, n = backend.scan_loglik(
            cells, edt, 0.0, 0.0, 0.05, 0.5, 1.0, 0.0,
            np.array([0.0]), np.array([2.0]), np.array([0], dtype=np.uint8),
            0.9, 0.2, 0.1, 8.0,
        )
        assert (ll, n) == (0.0, 0)

    def test_parity_random(self) -> None:
        if _core is None:
            pytest.skip("compiled core unavailable")
        cells, edt = self.setup_field()
        rng = np.random.default_rng(31)
        for _ in range(10):
            bearings = rng.uniform(-math.pi, math.pi, size=72)
            ranges = rng.uniform(0.1, 3.0, size=72)
            returned = (rng.uniform(size=72) < 0.9).astype(np.uint8)
            px, py, pth = rng.uniform(0.2, 1.8), rng.uniform(0.2, 1.8), rng.uniform(-3, 3)
            a = _pure.scan_loglik(
                cells, edt, 0.0, 0.0, 0.05, px, py, pth, bearings, ranges, returned,
                0.9, 0.2, 0.1, 8.0,
            )
            b = _core.scan_loglik(
                cells, edt, 0.0, 0.0, 0.05, px, py, pth, bearings, ranges, returned,
                0.9, 0.2, 0.1, 8.0,
            )
            assert a[1] == b[1]
            assert a[0] == pytest.approx(b[0], abs=1e-9)


class TestMatchScan:
    def make_scene(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        # asymmetric L of points so the optimum transform is unique
        xs = np.concatenate([np.linspace(0.0, 1.0, 11), np.full(7, 1.0)])
        ys = np.concatenate([np.zeros(11), np.linspace(0.15, 1.05, 7)])
        raster = np.zeros((120, 120))
        res = 0.05
        for x, y in zip(xs, ys):
            c = int(math.floor((x + 2.0) / res))
            r = int(math.floor((y + 2.0) / res))
            raster[r, c] = 1.0
        return xs, ys, raster

    def test_recovers_known_offset(self, backend) -> None:
        xs, ys, raster = self.make_scene()
        score, tx, ty, tth = backend.match_scan(
            raster, -2.0, -2.0, 0.05, xs, ys,
            0.1, -0.15, 0.0, 0.3, 0.05, math.radians(10.0), math.radians(1.0),
        )
        assert score == pytest.approx(1.0)
        assert tx == pytest.approx(0.0, abs=1e-9)
        assert ty == pytest.approx(0.0, abs=1e-9)
        assert tth == pytest.approx(0.0, abs=1e-9)

    def test_recovers_rotation(self, backend) -> None:
        xs, ys, raster = self.make_scene()
        ang = math.radians(5.0)
        rot_x = math.cos(-ang) * xs - math.sin(-ang) * ys
        rot_y = math.sin(-ang) * xs + math.cos(-ang) * ys
        score, tx, ty, tth = backend.match_scan(
            raster, -2.0, -2.0, 0.05, rot_x, rot_y,
            0.0, 0.0, 0.0, 0.2, 0.05, math.radians(10.0), math.radians(1.0),
        )
        assert tth == pytest.approx(ang, abs=1e-9)
        assert score > 0.8

    def test_score_bounded(self, backend) -> None:
        xs, ys, raster = self.make_scene()
        score, *_ = backend.match_scan(
            raster, -2.0, -2.0, 0.05, xs, ys,
            0.0, 0.0, 0.0, 0.1, 0.05, math.radians(2.0), math.radians(1.0),
        )
        assert 0.0 <= score <= 1.0

    def test_points_off_raster_score_zero(self, backend) -> None:
        raster = np.ones((10, 10))
        score, *_ = backend.match_scan(
            raster, 0.0, 0.0, 0.05, np.array([50.0]), np.array([50.0]),
            0.0, 0.0, 0.0, 0.05, 0.05, 0.0, math.radians(1.0),
        )
        assert score == 0.0

    def test_parity_random(self) -> None:
        if _core is None:
            pytest.skip("compiled core unavailable")
        rng = np.random.default_rng(47)
        raster = rng.uniform(size=(80, 80))
        for _ in range(5):
            qx = rng.uniform(-0.8, 0.8, size=40)
            qy = rng.uniform(-0.8, 0.8, size=40)
            cx, cy = rng.uniform(-0.2, 0.2, size=2)
            cth = rng.uniform(-0.3, 0.3)
            a = _pure.match_scan(
                raster, -2.0, -2.0, 0.05, qx, qy, cx, cy, cth,
                0.2, 0.05, math.radians(5.0), math.radians(1.0),
            )
            b = _core.match_scan(
                raster, -2.0, -2.0, 0.05, qx, qy, cx, cy, cth,
                0.2, 0.05, math.radians(5.0), math.radians(1.0),
            )
            assert a[0] == pytest.approx(b[0], abs=1e-9)
            assert a[1:] == pytest.approx(b[1:], abs=1e-9)


def test_backend_selection_env(monkeypatch) -> None:
    import slam2d.kernels as k

    monkeypatch.setenv("SLAM2D_KERNELS", "pure")
    mod = importlib.reload(k)
    assert mod.BACKEND == "pure"
    monkeypatch.delenv("SLAM2D_KERNELS")
    mod = importlib.reload(k)
    assert mod.BACKEND in ("cython", "pure")
