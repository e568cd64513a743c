import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fusodom.core import (
    InvalidArgumentError,
    Measurement,
    Pose2D,
    SensorKind,
    Trajectory,
    body_to_world,
    make_state,
    wrap_angle,
    wrap_angles,
)

from oracles import rotate

finite = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False)


@pytest.mark.parametrize(
    "theta, expected",
    [
        (0.0, 0.0),
        (3 * math.pi / 2, -math.pi / 2),
        (-6.2, -6.2 + 2 * math.pi),
        (math.pi, math.pi),
        (-math.pi, math.pi),
    ],
)
def test_wrap_angle_examples(theta, expected):
    assert wrap_angle(theta) == pytest.approx(expected, abs=1e-12)


def test_wrap_angle_minus_6_2():
    assert wrap_angle(-6.2) == pytest.approx(0.0832, abs=1e-4)


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_wrap_angle_rejects_non_finite(bad):
    with pytest.raises(InvalidArgumentError):
        wrap_angle(bad)


def test_wrap_angle_idempotent_bulk():
    theta = np.random.default_rng(3).uniform(-100, 100, 10_000)
    once = np.array([wrap_angle(t) for t in theta])
    twice = np.array([wrap_angle(t) for t in once])
    assert np.array_equal(once, twice)
    assert np.all(once > -math.pi) and np.all(once <= math.pi)
    # congruent mod 2 pi
    k = (theta - once) / (2 * math.pi)
    assert np.max(np.abs(k - np.round(k))) < 1e-9


@given(finite)
def test_wrap_scalar_matches_vector(theta):
    assert wrap_angle(theta) == wrap_angles(np.array([theta]))[0]


def test_body_to_world_examples():
    assert np.allclose(body_to_world([1, 0], 0.0), [1, 0], atol=1e-15)
    assert np.allclose(body_to_world([1, 0], math.pi / 2), [0, 1], atol=1e-15)
    assert np.allclose(body_to_world([3, 4], 0.7), rotate([3, 4], 0.7), atol=1e-15)


@given(finite, finite, finite)
def test_body_to_world_preserves_norm(vx, vy, yaw):
    out = body_to_world([vx, vy], yaw)
    assert abs(np.hypot(*out) - math.hypot(vx, vy)) <= 1e-12 * max(1.0, math.hypot(vx, vy))


def test_body_to_world_rejects_nan():
    with pytest.raises(InvalidArgumentError):
        body_to_world([math.nan, 0], 0.0)


def test_pose_wraps_yaw():
    assert Pose2D(0, 0, 3 * math.pi / 2).yaw == pytest.approx(-math.pi / 2)


def test_make_state_rejects_unknown_component():
    with pytest.raises(InvalidArgumentError):
        make_state(z=1.0)


@pytest.mark.parametrize("kind", list(SensorKind))
@pytest.mark.parametrize("length", range(0, 6))
def test_measurement_rejects_every_length_mismatch(kind, length):
    value = np.zeros(length)
    if length == kind.dim:
        Measurement(0.0, kind, value, np.ones(length))
    else:
        with pytest.raises(InvalidArgumentError):
            Measurement(0.0, kind, value, np.ones(kind.dim))


def test_measurement_noise_checks():
    with pytest.raises(InvalidArgumentError):
        Measurement(0.0, SensorKind.IPS, [0, 0], [[1, 0.5], [0, 1]])  # asymmetric
    with pytest.raises(InvalidArgumentError):
        Measurement(0.0, SensorKind.IPS, [0, 0], [1, 0])  # singular
    with pytest.raises(InvalidArgumentError):
        Measurement(0.0, SensorKind.IPS, [0, 0], [[1, 2], [2, 1]])  # indefinite
    m = Measurement(0.5, "IpsPosition", [1, 2], [[1, 0.2], [0.2, 1]])
    assert m.kind is SensorKind.IPS
    assert not m.value.flags.writeable


def test_measurement_rejects_negative_stamp():
    with pytest.raises(InvalidArgumentError):
        Measurement(-0.1, SensorKind.IPS, [0, 0], [1, 1])


def test_trajectory_requires_increasing_stamps():
    with pytest.raises(InvalidArgumentError):
        Trajectory([0, 1, 1], [0, 0, 0], [0, 0, 0], [0, 0, 0])
    with pytest.raises(InvalidArgumentError):
        Trajectory([], [], [], [])


def test_trajectory_interpolates_yaw_across_pi():
    tr = Trajectory([0, 1], [0, 1], [0, 0], [3.1, -3.1])
    _, _, yaw = tr.interpolate([0.5])[0]
    assert abs(wrap_angle(yaw - math.pi)) < 1e-12
