"""Kinematics tests: duty-to-speed map, the exact-arc integrator against a
fine-step Euler oracle, branch continuity, and time-slicing consistency."""

from __future__ import annotations

import math
import random

import numpy as np
import pytest

from roversim.device import Direction
from roversim.kinematics import (
    KinematicsParams,
    Pose2D,
    integrate_pose,
    normalize_angle,
    wheel_speed,
)

PARAMS = KinematicsParams()


def euler_oracle(pose: Pose2D, v_l, v_r, track, dt, fine=1e-5):
    """Vectorized fine-step Euler integration; v_l/v_r/dt are arrays."""
    v = (v_l + v_r) / 2.0
    omega = (v_r - v_l) / track
    x = np.full_like(v, pose.x_m)
    y = np.full_like(v, pose.y_m)
    theta = np.full_like(v, pose.heading_rad)
    remaining = dt.copy()
    while np.any(remaining > 0):
        h = np.minimum(remaining, fine)
        h = np.where(remaining > 0, h, 0.0)
        x += v * np.cos(theta) * h
        y += v * np.sin(theta) * h
        theta += omega * h
        remaining -= h
    return x, y, theta


def test_wheel_speed_zero_duty():
    assert wheel_speed(0, Direction.FORWARD, PARAMS) == 0.0


def test_wheel_speed_full_duty_is_max():
    assert wheel_speed(255, Direction.FORWARD, PARAMS) == pytest.approx(1.0)


def test_wheel_speed_half_reverse():
    assert wheel_speed(128, Direction.REVERSE, PARAMS) == pytest.approx(-1.0 * 128 / 255)


def test_wheel_speed_stall_deadzone():
    assert wheel_speed(19, Direction.FORWARD, PARAMS) == 0.0
    assert wheel_speed(20, Direction.FORWARD, PARAMS) != 0.0


def test_wheel_speed_brake_is_zero():
    assert wheel_speed(255, Direction.BRAKE, PARAMS) == 0.0


def test_integrate_straight_line():
    out = integrate_pose(Pose2D(0.0, 0.0, 0.0), 1.0, 1.0, 0.15, 1.0)
    assert out == Pose2D(1.0, 0.0, 0.0)


def test_integrate_spin_in_place():
    out = integrate_pose(Pose2D(2.0, 3.0, 0.5), -0.5, 0.5, 0.15, 0.1)
    assert out.x_m == 2.0 and out.y_m == 3.0
    assert out.heading_rad == pytest.approx(0.5 + (1.0 / 0.15) * 0.1)


def test_integrate_arc_against_euler_oracle():
    rng = random.Random(4242)
    n = 1000
    v_l = np.array([rng.uniform(-1.0, 1.0) for _ in range(n)])
    v_r = np.array([rng.uniform(-1.0, 1.0) for _ in range(n)])
    dt = np.array([rng.uniform(0.01, 1.0) for _ in range(n)])
    start = Pose2D(0.3, -0.2, 0.7)
    ox, oy, _ = euler_oracle(start, v_l, v_r, PARAMS.track_width_m, dt)
    for i in range(n):
        got = integrate_pose(start, v_l[i], v_r[i], PARAMS.track_width_m, dt[i])
        assert abs(got.x_m - ox[i]) < 1e-4
        assert abs(got.y_m - oy[i]) < 1e-4


def test_branch_continuity_near_threshold():
    # Straight vs arc branch at |omega| around 1e-9 rad/s over one tick.
    track = 0.15
    for omega in (9.99e-10, 1.01e-9, 2e-9, 5e-10):
        v = 1.0
        dv = omega * track / 2.0
        arc = integrate_pose(Pose2D(0, 0, 0.3), v - dv, v + dv, track, 0.02)
        straight = integrate_pose(Pose2D(0, 0, 0.3), v, v, track, 0.02)
        assert math.hypot(arc.x_m - straight.x_m, arc.y_m - straight.y_m) < 1e-6


def test_time_slicing_consistency():
    # The closed form is exact for constant speeds: one step of dt equals
    # two steps of dt/2 up to representation error.
    rng = random.Random(9)
    for _ in range(200):
        v_l, v_r = rng.uniform(-1, 1), rng.uniform(-1, 1)
        dt = rng.uniform(0.01, 0.5)
        start = Pose2D(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-3, 3))
        whole = integrate_pose(start, v_l, v_r, 0.15, dt)
        half = integrate_pose(start, v_l, v_r, 0.15, dt / 2)
        half = integrate_pose(half, v_l, v_r, 0.15, dt / 2)
        assert abs(whole.x_m - half.x_m) < 1e-9
        assert abs(whole.y_m - half.y_m) < 1e-9
        assert abs(normalize_angle(whole.heading_rad - half.heading_rad)) < 1e-9


def test_heading_stays_normalized():
    rng = random.Random(31)
    pose = Pose2D(0.0, 0.0, 0.0)
    for _ in range(2000):
        pose = integrate_pose(pose, rng.uniform(-1, 1), rng.uniform(-1, 1), 0.15,
                              rng.uniform(0.001, 0.1))
        assert -math.pi < pose.heading_rad <= math.pi


def test_reversibility_straight():
    rng = random.Random(8)
    for _ in range(200):
        start = Pose2D(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3))
        v = rng.uniform(-1, 1)
        dt = rng.uniform(0.01, 1.0)
        there = integrate_pose(start, v, v, 0.15, dt)
        back = integrate_pose(there, -v, -v, 0.15, dt)
        assert abs(back.x_m - start.x_m) < 1e-12
        assert abs(back.y_m - start.y_m) < 1e-12


def test_normalize_angle_edges():
    assert normalize_angle(math.pi) == pytest.approx(math.pi)
    assert normalize_angle(-math.pi) == pytest.approx(math.pi)
    assert normalize_angle(0.0) == 0.0
    assert normalize_angle(3 * math.pi) == pytest.approx(math.pi)
    for a in np.linspace(-20, 20, 400):
        n = normalize_angle(a)
        assert -math.pi < n <= math.pi
        assert abs(math.sin(n) - math.sin(a)) < 1e-12
        assert abs(math.cos(n) - math.cos(a)) < 1e-12


def test_params_validation():
    with pytest.raises(ValueError):
        KinematicsParams(track_width_m=0.0)
    with pytest.raises(ValueError):
        KinematicsParams(stall_duty=300)
    with pytest.raises(ValueError):
        wheel_speed(300, Direction.FORWARD, PARAMS)
