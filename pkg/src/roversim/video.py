"""First-person camera view synthesized from the rover pose and pan/tilt by
raycasting the occupancy grid (DDA per column, pinhole projection, no
fisheye).  Frames are raw RGB; compression happens only at the gateway
boundary.  render_frame is pure: identical inputs give byte-identical
buffers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kinematics import Pose2D, normalize_angle
from .world import WorldMap

SKY_RGB = (121, 168, 214)
FLOOR_RGB = (74, 68, 60)
WALL_NS_RGB = (186, 70, 52)  # faces crossed on a y gridline
WALL_EW_RGB = (142, 50, 38)  # faces crossed on an x gridline
SHADE_ROLLOFF_M = 5.0


@dataclass(frozen=True)
class RenderSettings:
    width_px: int = 320
    height_px: int = 240
    hfov_deg: float = 60.0
    wall_height_m: float = 0.5
    camera_height_m: float = 0.15
    max_ray_m: float = 30.0
    target_fps: float = 15.0

    def __post_init__(self) -> None:
        if self.width_px <= 0 or self.height_px <= 0:
            raise ValueError("frame dimensions must be positive")
        if not 0.0 < self.hfov_deg < 180.0:
            raise ValueError(f"hfov {self.hfov_deg} outside (0, 180)")
        if self.max_ray_m <= 0:
            raise ValueError("max_ray_m must be positive")

    @property
    def focal_px(self) -> float:
        return (self.width_px / 2.0) / math.tan(math.radians(self.hfov_deg) / 2.0)

    @property
    def vfov_deg(self) -> float:
        return math.degrees(2.0 * math.atan((self.height_px / 2.0) / self.focal_px))


@dataclass(frozen=True)
class FrameBuffer:
    width_px: int
    height_px: int
    pixels: bytes  # row-major RGB, 8 bits per channel
    frame_seq: int
    sim_time_s: float

    def __post_init__(self) -> None:
        if len(self.pixels) != self.width_px * self.height_px * 3:
            raise ValueError("pixel buffer size does not match dimensions")

    def to_array(self) -> np.ndarray:
        return np.frombuffer(self.pixels, dtype=np.uint8).reshape(
            self.height_px, self.width_px, 3
        )


def camera_heading(pose: Pose2D, pan_deg: float) -> float:
    return normalize_angle(pose.heading_rad + math.radians(pan_deg))


def cast_ray(world: WorldMap, x: float, y: float, angle: float,
             max_ray_m: float) -> tuple[float, int] | None:
    """DDA grid walk from (x, y); returns (distance, side) at the first wall
    or None past max_ray.  side 0 = x-gridline crossing, 1 = y-gridline."""
    cell = world.cell_size_m
    rows = world.rows
    w, h = world.width_cells, world.height_cells
    dirx = math.cos(angle)
    diry = math.sin(angle)
    mapx = int(math.floor(x / cell))
    mapy = int(math.floor(y / cell))

    if dirx > 0.0:
        step_x, delta_x = 1, cell / dirx
        side_x = ((mapx + 1) * cell - x) / dirx
    elif dirx < 0.0:
        step_x, delta_x = -1, cell / -dirx
        side_x = (x - mapx * cell) / -dirx
    else:
        step_x, delta_x, side_x = 0, math.inf, math.inf
    if diry > 0.0:
        step_y, delta_y = 1, cell / diry
        side_y = ((mapy + 1) * cell - y) / diry
    elif diry < 0.0:
        step_y, delta_y = -1, cell / -diry
        side_y = (y - mapy * cell) / -diry
    else:
        step_y, delta_y, side_y = 0, math.inf, math.inf

    while True:
        if side_x < side_y:
            t, side = side_x, 0
            side_x += delta_x
            mapx += step_x
        else:
            t, side = side_y, 1
            side_y += delta_y
            mapy += step_y
        if t > max_ray_m:
            return None
        if not (0 <= mapx < w and 0 <= mapy < h):
            return None  # borders are walls by invariant; never read outside
        if rows[mapy][mapx] == "#":
            return (t, side)


def render_frame(world: WorldMap, pose: Pose2D, pan_deg: float, tilt_deg: float,
                 s: RenderSettings, frame_seq: int = 0, sim_time_s: float = 0.0) -> FrameBuffer:
    """Raycast one frame.

    Column j casts at camera_heading + hfov*(j/(W-1) - 1/2); wall distance is
    corrected by the ray/center angle so flat walls render flat; positive
    tilt (camera up) shears the horizon down the image.
    """
    w, h = s.width_px, s.height_px
    cam = camera_heading(pose, pan_deg)
    focal = s.focal_px
    horizon = h / 2.0 + (tilt_deg / s.vfov_deg) * h

    buf = np.empty((h, w, 3), dtype=np.uint8)
    sky_split = min(h, max(0, int(round(horizon))))
    buf[:sky_split, :, :] = SKY_RGB
    buf[sky_split:, :, :] = FLOOR_RGB

    half_width = (w - 1) / 2.0
    hfov_rad = math.radians(s.hfov_deg)
    for j in range(w):
        offset = hfov_rad * ((j - half_width) / (w - 1))
        hit = cast_ray(world, pose.x_m, pose.y_m, cam + offset, s.max_ray_m)
        if hit is None:
            continue
        dist, side = hit
        d_perp = dist * math.cos(offset)
        half_px = focal * (s.wall_height_m / 2.0) / d_perp
        top = max(0, int(round(horizon - half_px)))
        bottom = min(h, int(round(horizon + half_px)))
        if top >= bottom:
            continue
        shade = 1.0 / (1.0 + d_perp / SHADE_ROLLOFF_M)
        base = WALL_NS_RGB if side == 1 else WALL_EW_RGB
        buf[top:bottom, j, 0] = int(base[0] * shade)
        buf[top:bottom, j, 1] = int(base[1] * shade)
        buf[top:bottom, j, 2] = int(base[2] * shade)

    return FrameBuffer(w, h, buf.tobytes(), frame_seq, sim_time_s)


def frame_pacer(target_fps: float, now: float, last_emit: float) -> bool:
    """Emit-now decision: true iff a full frame period has elapsed."""
    if target_fps <= 0:
        raise ValueError("target_fps must be positive")
    return now - last_emit >= 1.0 / target_fps


class FramePacer:
    """Accumulator pacing: long-run rate equals target_fps on a steady clock,
    never exceeds it, and resynchronizes instead of bursting after a stall."""

    def __init__(self, target_fps: float):
        if target_fps <= 0:
            raise ValueError("target_fps must be positive")
        self.target_fps = target_fps
        self.period = 1.0 / target_fps
        self.last_emit = -math.inf

    def should_emit(self, now: float) -> bool:
        if not frame_pacer(self.target_fps, now, self.last_emit):
            return False
        if now - self.last_emit >= 2.0 * self.period:
            self.last_emit = now  # bootstrap or stall: resync, don't burst
        else:
            self.last_emit += self.period
        return True
