"""The gateway's simulation core: one fixed-step timeline owning the device,
pose, link channels and mission log.

All mutation happens in tick(); network threads only enqueue value messages
(submit_live / schedule) and read published immutable snapshots.  Given a
seed, a config and a scheduled command script, the produced mission log is
byte-identical across runs.
"""

from __future__ import annotations

import heapq
import math
import threading
from dataclasses import dataclass
from typing import Callable

from . import device as dev
from . import link as linkmod
from .config import GatewayConfig, header_detail
from .kinematics import Pose2D, integrate_pose, wheel_speed
from .mission import MissionLog, MissionRecord
from .protocol import CommandFrame, TelemetryFrame, encode_telemetry
from .video import FramePacer
from .world import WorldMap, distance_to_base, format_world, move_with_collisions

# Nominal compressed-frame size used for the downlink video draw; the JPEG
# encoder runs on a worker after the outcome is already decided.
NOMINAL_FRAME_BYTES = 12000


@dataclass(frozen=True)
class SimSnapshot:
    """Immutable cross-thread view published after every tick.

    `device` is a copy taken on the tick thread; readers may hold it
    indefinitely without seeing later mutation.
    """

    sim_time_s: float
    tick: int
    device: dev.RoverDeviceState
    pose: Pose2D
    pan_deg: float
    tilt_deg: float
    battery_pct: int
    speed_setting: int
    dir_left: str
    dir_right: str
    leds_mask: int
    watchdog_engaged: bool
    distance_to_base_m: float
    rssi_dbm: float
    last_applied_seq: int
    first_dropped_seq: int | None
    frame_seq: int
    uplink: dict
    downlink: dict
    commands_received: int


class SimCore:
    def __init__(self, cfg: GatewayConfig, world: WorldMap,
                 mission_sink=None, world_text: str | None = None):
        self.cfg = cfg
        self.world = world
        self.dt = cfg.tick_dt
        self.device = dev.RoverDeviceState(watchdog_timeout_s=cfg.watchdog_timeout_s)
        bx, by = world.base_station
        self.pose = Pose2D(bx, by, 0.0)
        self.uplink = linkmod.LinkChannel(cfg.link, cfg.link.rng_seed)
        self.downlink = linkmod.LinkChannel(cfg.link, cfg.link.rng_seed + 1)
        self.mission = MissionLog(mission_sink)
        self.mission.append("Header", 0.0, 0,
                            header_detail(cfg, world, world_text or format_world(world)))
        self.frame_pacer = FramePacer(cfg.render.target_fps)
        self.telemetry_pacer = FramePacer(cfg.telemetry_hz)

        self._inbox_lock = threading.Lock()
        self._inbox: list[tuple[CommandFrame, int]] = []
        self._scheduled: list[tuple[float, int, CommandFrame, int]] = []
        self._pending: list[tuple[float, int, CommandFrame, float]] = []
        self._order = 0
        self._last_due = 0.0

        self.last_applied_seq = 0
        self.first_dropped_seq: int | None = None
        self.frame_seq = 0
        self.commands_received = 0
        self._battery_out_logged = False

        self.telemetry_listeners: list[Callable[[bytes], None]] = []
        self.frame_listeners: list[Callable[[SimSnapshot, int, float | None], None]] = []
        self._listener_lock = threading.Lock()

        self._snapshot_lock = threading.Lock()
        self._snapshot = self._build_snapshot()

    # -- called from network threads ------------------------------------

    def submit_live(self, frame: CommandFrame, wire_len: int) -> None:
        with self._inbox_lock:
            self._inbox.append((frame, wire_len))

    def schedule(self, at_s: float, frame: CommandFrame, wire_len: int) -> None:
        with self._inbox_lock:
            self._order += 1
            heapq.heappush(self._scheduled, (at_s, self._order, frame, wire_len))

    def add_telemetry_listener(self, fn: Callable[[bytes], None]) -> None:
        with self._listener_lock:
            self.telemetry_listeners.append(fn)

    def add_frame_listener(self, fn: Callable[[SimSnapshot, int, float | None], None]) -> None:
        with self._listener_lock:
            self.frame_listeners.append(fn)

    def snapshot(self) -> SimSnapshot:
        with self._snapshot_lock:
            return self._snapshot

    @property
    def sim_time(self) -> float:
        return self.device.time_s

    # -- tick thread ------------------------------------------------------

    def tick(self) -> None:
        d = self.device
        t0 = d.time_s
        t1 = t0 + self.dt
        tick_no = d.tick_count + 1

        # Ingest: scheduled frames that have come due, then live arrivals
        # in FIFO order.  Every frame takes one uplink draw at the rover's
        # current distance.
        arrivals: list[tuple[CommandFrame, int]] = []
        with self._inbox_lock:
            while self._scheduled and self._scheduled[0][0] <= t0:
                _, _, frame, wire_len = heapq.heappop(self._scheduled)
                arrivals.append((frame, wire_len))
            arrivals.extend(self._inbox)
            self._inbox.clear()
        dist = distance_to_base(self.world, self.pose)
        for frame, wire_len in arrivals:
            self.commands_received += 1
            delay = self.uplink.transmit(wire_len, dist)
            if delay is None:
                if self.first_dropped_seq is None:
                    self.first_dropped_seq = frame.seq
                self._record("CmdDropped", t0, tick_no,
                             {"seq": frame.seq, "verb": frame.verb, "arg": frame.arg})
            else:
                # Commands ride an ordered transport: jitter delays individual
                # frames but never reorders them (FIFO application contract).
                due = max(t0 + delay, self._last_due)
                self._last_due = due
                self._order += 1
                heapq.heappush(self._pending, (due, self._order, frame, delay))

        # Apply everything due by the end of this tick.
        while self._pending and self._pending[0][0] <= t1:
            _, _, frame, delay = heapq.heappop(self._pending)
            dev.apply_command(d, frame, t1)
            self.last_applied_seq = frame.seq
            self._record("CmdApplied", t1, tick_no,
                         {"seq": frame.seq, "verb": frame.verb, "arg": frame.arg,
                          "delay_s": delay})

        was_engaged = d.watchdog_engaged
        had_drive = any(
            ch.duty > 0 or ch.direction is not dev.Direction.BRAKE
            for ch in (d.left, d.right)
        )
        dev.tick_device(d, self.dt)
        if d.watchdog_engaged and not was_engaged and had_drive:
            self._record("WatchdogStop", t1, tick_no, {})
        if d.battery.depleted and not self._battery_out_logged:
            self._battery_out_logged = True
            self._record("BatteryOut", t1, tick_no, {})

        params = self.cfg.kinematics
        v_left = wheel_speed(d.left.duty, dev.effective_direction(d.left), params)
        v_right = wheel_speed(d.right.duty, dev.effective_direction(d.right), params)
        proposed = integrate_pose(self.pose, v_left, v_right, params.track_width_m, self.dt)
        moved = move_with_collisions(self.world, self.pose, proposed)
        if (moved.x_m, moved.y_m) != (proposed.x_m, proposed.y_m):
            self._record("Collision", t1, tick_no, {"x": moved.x_m, "y": moved.y_m})
        self.pose = moved

        dist = distance_to_base(self.world, self.pose)
        if self.telemetry_pacer.should_emit(t1):
            tframe = self._build_telemetry(dist)
            line = encode_telemetry(tframe)
            delay = self.downlink.transmit(len(line), dist)
            self._record("Telemetry", t1, tick_no, {
                "seq": tframe.seq,
                "delivered": delay is not None,
                "delay_s": delay,
                "x": self.pose.x_m, "y": self.pose.y_m, "heading": self.pose.heading_rad,
            })
            if delay is not None:
                with self._listener_lock:
                    listeners = list(self.telemetry_listeners)
                for fn in listeners:
                    fn(line)

        if self.frame_pacer.should_emit(t1):
            self.frame_seq += 1
            delay = self.downlink.transmit(NOMINAL_FRAME_BYTES, dist)
            self._record("FrameEmitted", t1, tick_no, {
                "frame_seq": self.frame_seq,
                "delivered": delay is not None,
                "delay_s": delay,
            })
            snap = self._build_snapshot()
            with self._listener_lock:
                listeners = list(self.frame_listeners)
            for fn in listeners:
                fn(snap, self.frame_seq, delay)

        with self._snapshot_lock:
            self._snapshot = self._build_snapshot()

    def run_until(self, sim_time_s: float) -> None:
        while self.device.time_s < sim_time_s:
            self.tick()

    # -- internals --------------------------------------------------------

    def _record(self, kind: str, sim_time: float, tick: int, detail: dict) -> MissionRecord:
        return self.mission.append(kind, sim_time, tick, detail)

    def _build_telemetry(self, dist: float) -> TelemetryFrame:
        d = self.device
        pose = None
        if self.cfg.debug_pose_in_telemetry:
            pose = (
                int(round(self.pose.x_m * 100.0)),
                int(round(self.pose.y_m * 100.0)),
                int(round(math.degrees(self.pose.heading_rad) * 100.0)),
            )
        return TelemetryFrame(
            seq=self.last_applied_seq,
            battery_pct=d.battery.percent,
            duty=max(d.left.duty, d.right.duty),
            dir_left=d.left.direction.value,
            dir_right=d.right.direction.value,
            pan_deg=int(round(d.pantilt.pan_deg)),
            tilt_deg=int(round(d.pantilt.tilt_deg)),
            leds=d.leds.to_mask(),
            rssi_dbm=int(round(linkmod.rssi(dist, self.cfg.link))),
            pose=pose,
        )

    def _build_snapshot(self) -> SimSnapshot:
        d = self.device
        dist = distance_to_base(self.world, self.pose)
        return SimSnapshot(
            sim_time_s=d.time_s,
            tick=d.tick_count,
            device=d.snapshot(),
            pose=self.pose,
            pan_deg=d.pantilt.pan_deg,
            tilt_deg=d.pantilt.tilt_deg,
            battery_pct=d.battery.percent,
            speed_setting=d.speed_setting,
            dir_left=d.left.direction.value,
            dir_right=d.right.direction.value,
            leds_mask=d.leds.to_mask(),
            watchdog_engaged=d.watchdog_engaged,
            distance_to_base_m=dist,
            rssi_dbm=linkmod.rssi(dist, self.cfg.link),
            last_applied_seq=self.last_applied_seq,
            first_dropped_seq=self.first_dropped_seq,
            frame_seq=self.frame_seq,
            uplink=self.uplink.stats.to_dict(),
            downlink=self.downlink.stats.to_dict(),
            commands_received=self.commands_received,
        )


def replay_mission(records: list[MissionRecord], world: WorldMap,
                   final_tick: int | None = None) -> dict[int, Pose2D]:
    """Re-simulate a recorded mission from its Header and CmdApplied records.

    Returns the pose after every tick, keyed by tick number.  Uses the same
    device and kinematics code paths as the live run, so the reconstruction
    is exact, not approximate.
    """
    if not records or records[0].kind != "Header":
        raise ValueError("mission log must start with a Header record")
    header = records[0].detail
    dt = 1.0 / header["tick_hz"]
    from .kinematics import KinematicsParams

    params = KinematicsParams(**header["kinematics"])
    state = dev.RoverDeviceState(watchdog_timeout_s=header["watchdog_timeout_s"])
    bx, by = header["world"]["base_station"]
    pose = Pose2D(bx, by, 0.0)

    by_tick: dict[int, list[MissionRecord]] = {}
    last_tick = 0
    for rec in records[1:]:
        last_tick = max(last_tick, rec.tick)
        if rec.kind == "CmdApplied":
            by_tick.setdefault(rec.tick, []).append(rec)
    if final_tick is not None:
        last_tick = max(last_tick, final_tick)

    trajectory: dict[int, Pose2D] = {0: pose}
    for tick_no in range(1, last_tick + 1):
        t1 = state.time_s + dt
        for rec in sorted(by_tick.get(tick_no, []), key=lambda r: r.n):
            frame = CommandFrame(rec.detail["verb"], rec.detail["arg"], rec.detail["seq"])
            dev.apply_command(state, frame, t1)
        dev.tick_device(state, dt)
        v_left = wheel_speed(state.left.duty, dev.effective_direction(state.left), params)
        v_right = wheel_speed(state.right.duty, dev.effective_direction(state.right), params)
        proposed = integrate_pose(pose, v_left, v_right, params.track_width_m, dt)
        pose = move_with_collisions(world, pose, proposed)
        trajectory[tick_no] = pose
    return trajectory
