"""Differential-drive kinematics: duty-to-speed mapping and the exact
constant-twist arc update.  Pure functions over value types."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .device import Direction

OMEGA_STRAIGHT_THRESHOLD = 1e-9  # rad/s below which the motion is a line


@dataclass(frozen=True)
class KinematicsParams:
    wheel_radius_m: float = 0.03
    track_width_m: float = 0.15
    max_wheel_speed_mps: float = 1.0  # at duty 255
    stall_duty: int = 20  # below this PWM the motor does not turn

    def __post_init__(self) -> None:
        if min(self.wheel_radius_m, self.track_width_m, self.max_wheel_speed_mps) <= 0:
            raise ValueError("kinematics parameters must be strictly positive")
        if not 0 <= self.stall_duty <= 255:
            raise ValueError(f"stall_duty {self.stall_duty} outside [0, 255]")


@dataclass(frozen=True)
class Pose2D:
    x_m: float = 0.0
    y_m: float = 0.0
    heading_rad: float = 0.0


def normalize_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    r = math.fmod(a + math.pi, 2.0 * math.pi)
    if r <= 0.0:
        r += 2.0 * math.pi
    return r - math.pi


def wheel_speed(duty: int, direction: Direction, params: KinematicsParams) -> float:
    """Signed wheel surface speed in m/s for a PWM duty command."""
    if not 0 <= duty <= 255:
        raise ValueError(f"duty {duty} outside [0, 255]")
    if direction is Direction.BRAKE or duty < params.stall_duty:
        return 0.0
    sign = 1.0 if direction is Direction.FORWARD else -1.0
    return sign * params.max_wheel_speed_mps * duty / 255.0


def integrate_pose(pose: Pose2D, v_left: float, v_right: float, track: float, dt: float) -> Pose2D:
    """Advance the pose by dt under constant wheel speeds.

    Uses the closed-form arc, which is exact for constant speeds; the
    near-zero-omega branch degenerates to a straight line.
    """
    if dt <= 0.0 or track <= 0.0:
        raise ValueError("dt and track must be positive")
    v = (v_left + v_right) / 2.0
    omega = (v_right - v_left) / track
    theta = pose.heading_rad
    if abs(omega) < OMEGA_STRAIGHT_THRESHOLD:
        return Pose2D(
            pose.x_m + v * math.cos(theta) * dt,
            pose.y_m + v * math.sin(theta) * dt,
            normalize_angle(theta),
        )
    radius = v / omega
    theta2 = theta + omega * dt
    return Pose2D(
        pose.x_m + radius * (math.sin(theta2) - math.sin(theta)),
        pose.y_m - radius * (math.cos(theta2) - math.cos(theta)),
        normalize_angle(theta2),
    )
