"""Pose algebra and angle wrapping."""

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from slam2d.geometry import Pose2, Twist, between, compose, inverse, wrap_angle

FINITE_ANGLES = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)
COORDS = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False)


def poses() -> st.SearchStrategy[Pose2]:
    return st.builds(Pose2, COORDS, COORDS, FINITE_ANGLES)


@given(FINITE_ANGLES)
def test_wrap_angle_range(theta: float) -> None:
    w = wrap_angle(theta)
    assert -math.pi < w <= math.pi


@given(st.floats(min_value=-10.0, max_value=10.0), st.integers(min_value=-3, max_value=3))
def test_wrap_angle_periodic(theta: float, k: int) -> None:
    assert wrap_angle(theta + 2.0 * math.pi * k) == pytest.approx(wrap_angle(theta), abs=1e-9)


def test_wrap_angle_boundaries() -> None:
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == math.pi
    assert wrap_angle(0.0) == 0.0
    assert wrap_angle(3.0 * math.pi) == pytest.approx(math.pi)


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_wrap_angle_rejects_nonfinite(bad: float) -> None:
    with pytest.raises(ValueError):
        wrap_angle(bad)


def test_pose_wraps_theta_on_construction() -> None:
    p = Pose2(1.0, 2.0, 3.0 * math.pi)
    assert p.theta == pytest.approx(math.pi)
    assert p.as_tuple() == (1.0, 2.0, p.theta)


def test_pose_rejects_nonfinite() -> None:
    with pytest.raises(ValueError):
        Pose2(math.nan, 0.0, 0.0)


@given(poses(), poses())
def test_between_inverts_compose(a: Pose2, d: Pose2) -> None:
    b = compose(a, d)
    rec = between(a, b)
    assert rec.x == pytest.approx(d.x, abs=1e-6)
    assert rec.y == pytest.approx(d.y, abs=1e-6)
    assert wrap_angle(rec.theta - d.theta) == pytest.approx(0.0, abs=1e-9)


@given(poses())
def test_compose_with_inverse_is_identity(a: Pose2) -> None:
    ident = compose(a, inverse(a))
    assert ident.x == pytest.approx(0.0, abs=1e-6)
    assert ident.y == pytest.approx(0.0, abs=1e-6)
    assert wrap_angle(ident.theta) == pytest.approx(0.0, abs=1e-9)


@given(poses(), poses(), poses())
def test_compose_is_associative(a: Pose2, b: Pose2, c: Pose2) -> None:
    left = compose(compose(a, b), c)
    right = compose(a, compose(b, c))
    assert left.x == pytest.approx(right.x, abs=1e-5)
    assert left.y == pytest.approx(right.y, abs=1e-5)
    assert wrap_angle(left.theta - right.theta) == pytest.approx(0.0, abs=1e-9)


def test_compose_known_case() -> None:
    a = Pose2(1.0, 0.0, math.pi / 2.0)
    d = Pose2(1.0, 0.0, 0.0)
    b = compose(a, d)
    assert b.x == pytest.approx(1.0)
    assert b.y == pytest.approx(1.0)
    assert b.theta == pytest.approx(math.pi / 2.0)


def test_twist_clamped() -> None:
    t = Twist(2.0, -5.0)
    c = t.clamped(1.0, 2.0)
    assert c == Twist(1.0, -2.0)
    assert Twist(0.5, 0.5).clamped(1.0, 2.0) == Twist(0.5, 0.5)


def test_twist_rejects_nonfinite() -> None:
    with pytest.raises(ValueError):
        Twist(math.inf, 0.0)
