"""Electrical model of the rover as assembled on the bench: two H-bridge
motor channels behind a 2 A dual-channel driver shield, a pan-tilt servo
pair on logical pins D7/D6, a battery pack, and the shield's 8-LED status
panel.  Advanced by a fixed-step tick; all mutation happens on one tick
thread, snapshots are plain copies."""

from __future__ import annotations

import copy
import enum
from dataclasses import dataclass, field

from . import protocol
from .protocol import CommandFrame

DUTY_MAX = 255
CHANNEL_CURRENT_LIMIT_A = 2.0

PAN_MIN_DEG, PAN_MAX_DEG = -90.0, 90.0
TILT_MIN_DEG, TILT_MAX_DEG = -30.0, 60.0
SERVO_SLEW_DEG_PER_S = 180.0
PAN_PIN = "D7"
TILT_PIN = "D6"

BATTERY_NOMINAL_V = 7.4
BATTERY_CUTOFF_V = 6.0
BATTERY_CAPACITY_MAH = 2200.0

DEFAULT_SPEED_SETTING = 180
DEFAULT_WATCHDOG_TIMEOUT_S = 0.5
MAX_TICK_DT_S = 0.1


class Direction(enum.Enum):
    FORWARD = "F"
    REVERSE = "R"
    BRAKE = "B"


class Polarity(enum.Enum):
    NORMAL = "normal"
    SWAPPED = "swapped"


@dataclass
class MotorChannel:
    duty: int = 0
    direction: Direction = Direction.BRAKE
    polarity: Polarity = Polarity.NORMAL
    current_amps: float = 0.0


@dataclass
class PanTiltUnit:
    pan_deg: float = 0.0
    tilt_deg: float = 0.0
    pan_target_deg: float = 0.0
    tilt_target_deg: float = 0.0
    slew_rate_deg_per_s: float = SERVO_SLEW_DEG_PER_S
    pan_pin: str = PAN_PIN
    tilt_pin: str = TILT_PIN


@dataclass
class BatteryPack:
    voltage_v: float = BATTERY_NOMINAL_V
    capacity_mah: float = BATTERY_CAPACITY_MAH
    remaining_mah: float = BATTERY_CAPACITY_MAH
    cutoff_v: float = BATTERY_CUTOFF_V

    @property
    def depleted(self) -> bool:
        return self.remaining_mah <= 0.0

    @property
    def percent(self) -> int:
        return int(round(100.0 * self.remaining_mah / self.capacity_mah))


@dataclass
class LedPanel:
    """The shield's 8 indicators; field order matches the telemetry mask."""

    power: bool = False
    rst: bool = False
    speed_ch1: bool = False
    speed_ch2: bool = False
    dir_ch1_fwd: bool = False
    dir_ch1_rev: bool = False
    dir_ch2_fwd: bool = False
    dir_ch2_rev: bool = False

    def to_mask(self) -> int:
        mask = 0
        for bit, name in enumerate(protocol.LED_BITS):
            if getattr(self, name):
                mask |= 1 << bit
        return mask


@dataclass
class RoverDeviceState:
    left: MotorChannel = field(default_factory=MotorChannel)
    right: MotorChannel = field(default_factory=MotorChannel)
    pantilt: PanTiltUnit = field(default_factory=PanTiltUnit)
    battery: BatteryPack = field(default_factory=BatteryPack)
    leds: LedPanel = field(default_factory=LedPanel)
    last_command_at: float = 0.0
    tick_count: int = 0
    # Bookkeeping beyond the wire-visible electrical state:
    speed_setting: int = DEFAULT_SPEED_SETTING
    watchdog_timeout_s: float = DEFAULT_WATCHDOG_TIMEOUT_S
    time_s: float = 0.0
    reset_flag: bool = True
    watchdog_engaged: bool = False

    def __post_init__(self) -> None:
        self.leds = compute_leds(self)

    def snapshot(self) -> "RoverDeviceState":
        return copy.deepcopy(self)


def _clamp(v: float, lo: float, hi: float) -> float:
    return lo if v < lo else hi if v > hi else v


def effective_direction(ch: MotorChannel) -> Direction:
    """Direction seen at the wheel after the wiring-swap fix is modeled.

    Brake is a fixed point; Forward/Reverse flip under Swapped polarity.
    """
    if ch.direction is Direction.BRAKE or ch.polarity is Polarity.NORMAL:
        return ch.direction
    return Direction.REVERSE if ch.direction is Direction.FORWARD else Direction.FORWARD


def compute_leds(state: RoverDeviceState) -> LedPanel:
    """Panel as a pure function of duties, directions, battery and reset flag."""
    if state.battery.depleted:
        return LedPanel()
    return LedPanel(
        power=True,
        rst=state.reset_flag,
        speed_ch1=state.left.duty > 0,
        speed_ch2=state.right.duty > 0,
        dir_ch1_fwd=state.left.direction is Direction.FORWARD,
        dir_ch1_rev=state.left.direction is Direction.REVERSE,
        dir_ch2_fwd=state.right.direction is Direction.FORWARD,
        dir_ch2_rev=state.right.direction is Direction.REVERSE,
    )


_MOV_DIRECTIONS = {
    protocol.MOV_FORWARD: (Direction.FORWARD, Direction.FORWARD),
    protocol.MOV_BACKWARD: (Direction.REVERSE, Direction.REVERSE),
    protocol.MOV_LEFT: (Direction.REVERSE, Direction.FORWARD),  # spin turn
    protocol.MOV_RIGHT: (Direction.FORWARD, Direction.REVERSE),
}


def apply_command(state: RoverDeviceState, cmd: CommandFrame, now: float) -> RoverDeviceState:
    """Apply one validated command frame at simulation time `now`.

    Clamps instead of rejecting; a depleted battery accepts commands but the
    outputs stay at zero.
    """
    if cmd.verb == "MOV":
        dl, dr = _MOV_DIRECTIONS[cmd.arg]
        state.left.direction = dl
        state.right.direction = dr
        state.left.duty = state.speed_setting
        state.right.duty = state.speed_setting
    elif cmd.verb == "SPD":
        state.speed_setting = cmd.arg
        if state.left.direction is not Direction.BRAKE:
            state.left.duty = cmd.arg
        if state.right.direction is not Direction.BRAKE:
            state.right.duty = cmd.arg
    elif cmd.verb == "PAN":
        state.pantilt.pan_target_deg = _clamp(float(cmd.arg), PAN_MIN_DEG, PAN_MAX_DEG)
    elif cmd.verb == "TLT":
        state.pantilt.tilt_target_deg = _clamp(float(cmd.arg), TILT_MIN_DEG, TILT_MAX_DEG)
    elif cmd.verb == "STP":
        _force_stop(state)
    # PNG changes only last_command_at

    if state.battery.depleted:
        _force_outputs_zero(state)
    state.last_command_at = now
    state.watchdog_engaged = False
    state.leds = compute_leds(state)
    return state


def _force_stop(state: RoverDeviceState) -> None:
    for ch in (state.left, state.right):
        ch.direction = Direction.BRAKE
        ch.duty = 0


def _force_outputs_zero(state: RoverDeviceState) -> None:
    for ch in (state.left, state.right):
        ch.duty = 0
        ch.current_amps = 0.0


def tick_device(state: RoverDeviceState, dt: float) -> RoverDeviceState:
    """Advance the electronics by one fixed step of dt seconds."""
    if not 0.0 < dt <= MAX_TICK_DT_S:
        raise ValueError(f"dt must be in (0, {MAX_TICK_DT_S}], got {dt}")

    state.tick_count += 1
    state.time_s += dt
    now = state.time_s

    # Watchdog first: a silent link brakes the channels before they can
    # contribute current or motion this tick.
    engaged = now - state.last_command_at > state.watchdog_timeout_s
    if engaged:
        _force_stop(state)
    state.watchdog_engaged = engaged

    pt = state.pantilt
    if not state.battery.depleted:
        max_step = pt.slew_rate_deg_per_s * dt
        pt.pan_deg += _clamp(pt.pan_target_deg - pt.pan_deg, -max_step, max_step)
        pt.tilt_deg += _clamp(pt.tilt_target_deg - pt.tilt_deg, -max_step, max_step)

    total_amps = 0.0
    for ch in (state.left, state.right):
        if state.battery.depleted:
            ch.current_amps = 0.0
        else:
            ch.current_amps = min(
                CHANNEL_CURRENT_LIMIT_A,
                CHANNEL_CURRENT_LIMIT_A * ch.duty / DUTY_MAX,
            )
        total_amps += ch.current_amps

    bat = state.battery
    drain_mah = total_amps * dt * (1000.0 / 3600.0)
    bat.remaining_mah = max(0.0, bat.remaining_mah - drain_mah)
    bat.voltage_v = bat.cutoff_v + (BATTERY_NOMINAL_V - bat.cutoff_v) * (
        bat.remaining_mah / bat.capacity_mah
    )
    if bat.depleted:
        _force_outputs_zero(state)

    state.reset_flag = False
    state.leds = compute_leds(state)
    return state


def check_invariants(state: RoverDeviceState) -> None:
    """Raise AssertionError if any structural invariant is violated.

    Exercised by the property suites after every operation.
    """
    for ch in (state.left, state.right):
        assert 0 <= ch.duty <= DUTY_MAX, f"duty {ch.duty}"
        assert ch.current_amps <= CHANNEL_CURRENT_LIMIT_A + 1e-12, f"current {ch.current_amps}"
        assert ch.current_amps >= 0.0
    pt = state.pantilt
    assert PAN_MIN_DEG <= pt.pan_deg <= PAN_MAX_DEG
    assert PAN_MIN_DEG <= pt.pan_target_deg <= PAN_MAX_DEG
    assert TILT_MIN_DEG <= pt.tilt_deg <= TILT_MAX_DEG
    assert TILT_MIN_DEG <= pt.tilt_target_deg <= TILT_MAX_DEG
    assert pt.pan_pin == PAN_PIN and pt.tilt_pin == TILT_PIN
    assert state.battery.remaining_mah >= 0.0
    assert state.tick_count >= 0
    leds = state.leds
    assert len(vars(leds)) == 8, "panel must have exactly 8 indicators"
    assert not (leds.dir_ch1_fwd and leds.dir_ch1_rev)
    assert not (leds.dir_ch2_fwd and leds.dir_ch2_rev)
    above_cutoff = not state.battery.depleted
    assert leds.speed_ch1 == (state.left.duty > 0 and above_cutoff)
    assert leds.speed_ch2 == (state.right.duty > 0 and above_cutoff)
    assert vars(compute_leds(state)) == vars(leds), "stored panel out of sync"
    if state.battery.depleted:
        assert state.left.duty == 0 and state.right.duty == 0
        assert state.left.current_amps == 0.0 and state.right.current_amps == 0.0
    if state.watchdog_engaged:
        assert state.left.direction is Direction.BRAKE and state.left.duty == 0
        assert state.right.direction is Direction.BRAKE and state.right.duty == 0
