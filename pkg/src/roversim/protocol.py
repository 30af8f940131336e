"""Operator<->rover wire protocol.

Line-oriented ASCII with an NMEA-style XOR checksum, one frame per line:

    C <VERB> <arg> <seq>*<XX>\\n                                  command
    T <seq> <bat> <duty> <dl> <dr> <pan> <tilt> <leds> <rssi> [x y h]*<XX>\\n
    E <code>*<XX>\\n                                              error reply

<XX> is two uppercase hex digits: the XOR of every byte between the leading
type character and the '*', exclusive of both.  Encodings are pure ASCII and
at most 64 bytes.  The codec is pure and reentrant; decode is total over
arbitrary bytes and raises only ProtocolError subclasses.
"""

from __future__ import annotations

from dataclasses import dataclass

VERBS = ("MOV", "SPD", "PAN", "TLT", "STP", "PNG")

# MOV argument values
MOV_FORWARD = 0
MOV_BACKWARD = 1
MOV_LEFT = 2
MOV_RIGHT = 3

SEQ_MOD = 65536

# Inclusive (lo, hi) per verb.  PAN/TLT accept a generous range on the wire;
# the device clamps to its mechanical limits.
ARG_RANGES = {
    "MOV": (0, 3),
    "SPD": (0, 255),
    "PAN": (-180, 180),
    "TLT": (-180, 180),
    "STP": (0, 0),
    "PNG": (0, 0),
}

DIR_CODES = ("F", "R", "B")

# Telemetry LED mask bit assignment, LSB first: bit 0 = power ... bit 7 = d2r.
LED_BITS = (
    "power",
    "rst",
    "speed_ch1",
    "speed_ch2",
    "dir_ch1_fwd",
    "dir_ch1_rev",
    "dir_ch2_fwd",
    "dir_ch2_rev",
)

MAX_LINE_BYTES = 64


class ProtocolError(Exception):
    """Base class for decode failures; .code is the machine-readable name."""

    code = "ProtocolError"


class Malformed(ProtocolError):
    code = "Malformed"


class BadChecksum(ProtocolError):
    code = "BadChecksum"


class UnknownVerb(ProtocolError):
    code = "UnknownVerb"


class ArgOutOfRange(ProtocolError):
    code = "ArgOutOfRange"


ERROR_CODES = ("Malformed", "BadChecksum", "UnknownVerb", "ArgOutOfRange")


@dataclass(frozen=True)
class CommandFrame:
    """One operator instruction on the wire."""

    verb: str
    arg: int
    seq: int

    def validate(self) -> None:
        if self.verb not in VERBS:
            raise UnknownVerb(f"unknown verb {self.verb!r}")
        lo, hi = ARG_RANGES[self.verb]
        if not lo <= self.arg <= hi:
            raise ArgOutOfRange(f"{self.verb} arg {self.arg} outside [{lo}, {hi}]")
        if not 0 <= self.seq < SEQ_MOD:
            raise ArgOutOfRange(f"seq {self.seq} outside [0, {SEQ_MOD - 1}]")


@dataclass(frozen=True)
class TelemetryFrame:
    """Periodic rover->operator status frame.

    pose is None unless the gateway runs with debug_pose_in_telemetry; when
    present it is (x_cm, y_cm, heading_cdeg) as integers.
    """

    seq: int
    battery_pct: int
    duty: int
    dir_left: str
    dir_right: str
    pan_deg: int
    tilt_deg: int
    leds: int
    rssi_dbm: int
    pose: tuple[int, int, int] | None = None

    def validate(self) -> None:
        if not 0 <= self.seq < SEQ_MOD:
            raise ArgOutOfRange(f"seq {self.seq}")
        if not 0 <= self.battery_pct <= 100:
            raise ArgOutOfRange(f"battery {self.battery_pct}")
        if not 0 <= self.duty <= 255:
            raise ArgOutOfRange(f"duty {self.duty}")
        if self.dir_left not in DIR_CODES or self.dir_right not in DIR_CODES:
            raise ArgOutOfRange(f"direction {self.dir_left}/{self.dir_right}")
        if not -90 <= self.pan_deg <= 90:
            raise ArgOutOfRange(f"pan {self.pan_deg}")
        if not -30 <= self.tilt_deg <= 60:
            raise ArgOutOfRange(f"tilt {self.tilt_deg}")
        if not 0 <= self.leds <= 0xFF:
            raise ArgOutOfRange(f"leds {self.leds:#x}")
        if not -95 <= self.rssi_dbm <= -40:
            raise ArgOutOfRange(f"rssi {self.rssi_dbm}")
        if self.pose is not None:
            x, y, h = self.pose
            if not -18000 <= h <= 18000:
                raise ArgOutOfRange(f"heading {h} cdeg")
            if abs(x) > 10**6 or abs(y) > 10**6:
                raise ArgOutOfRange(f"pose {x},{y} cm")


def checksum(payload: bytes) -> int:
    c = 0
    for b in payload:
        c ^= b
    return c


def _frame(lead: str, body: str) -> bytes:
    payload = " " + body
    line = f"{lead}{payload}*{checksum(payload.encode('ascii')):02X}\n"
    data = line.encode("ascii")
    if len(data) > MAX_LINE_BYTES:
        raise ValueError(f"encoded line exceeds {MAX_LINE_BYTES} bytes: {line!r}")
    return data


def encode_command(cmd: CommandFrame) -> bytes:
    cmd.validate()
    return _frame("C", f"{cmd.verb} {cmd.arg} {cmd.seq}")


def encode_telemetry(t: TelemetryFrame) -> bytes:
    t.validate()
    body = (
        f"{t.seq} {t.battery_pct} {t.duty} {t.dir_left} {t.dir_right} "
        f"{t.pan_deg} {t.tilt_deg} {t.leds:02X} {t.rssi_dbm}"
    )
    if t.pose is not None:
        body += f" {t.pose[0]} {t.pose[1]} {t.pose[2]}"
    return _frame("T", body)


def encode_error(code: str) -> bytes:
    if code not in ERROR_CODES:
        raise ValueError(f"unknown error code {code!r}")
    return _frame("E", code)


def _split_line(data: bytes | str, lead: str) -> list[str]:
    """Common frame surgery: terminator, checksum verification, tokenizing."""
    if isinstance(data, bytes):
        text = data.decode("latin-1")
    else:
        text = data
    if not text.endswith("\n"):
        raise Malformed("missing newline terminator")
    text = text[:-1]
    if "\n" in text or "\r" in text:
        raise Malformed("embedded line break")
    if not text.startswith(lead + " "):
        raise Malformed(f"not a {lead!r} frame")
    body, star, check = text.rpartition("*")
    if not star:
        raise Malformed("missing checksum separator")
    if len(check) != 2 or any(c not in "0123456789ABCDEF" for c in check):
        raise Malformed(f"bad checksum field {check!r}")
    payload = body[1:]  # between lead char and '*', exclusive
    if checksum(payload.encode("latin-1")) != int(check, 16):
        raise BadChecksum(f"checksum mismatch on {text!r}")
    fields = payload.split(" ")
    # payload starts with the separator space, so fields[0] is the empty
    # slot before it; any other empty slot means doubled/trailing spaces.
    if any(f == "" for f in fields[1:]):
        raise Malformed("empty field")
    return fields[1:]


def _int_field(token: str, what: str) -> int:
    t = token[1:] if token.startswith("-") else token
    if not t.isascii() or not t.isdigit():
        raise Malformed(f"non-integer {what} {token!r}")
    return int(token)


def decode_command(data: bytes | str) -> CommandFrame:
    fields = _split_line(data, "C")
    if len(fields) != 3:
        raise Malformed(f"expected 3 command fields, got {len(fields)}")
    verb, arg_s, seq_s = fields
    if verb not in VERBS:
        raise UnknownVerb(f"unknown verb {verb!r}")
    arg = _int_field(arg_s, "arg")
    seq = _int_field(seq_s, "seq")
    frame = CommandFrame(verb, arg, seq)
    frame.validate()
    return frame


def decode_telemetry(data: bytes | str) -> TelemetryFrame:
    fields = _split_line(data, "T")
    if len(fields) not in (9, 12):
        raise Malformed(f"expected 9 or 12 telemetry fields, got {len(fields)}")
    seq = _int_field(fields[0], "seq")
    battery = _int_field(fields[1], "battery")
    duty = _int_field(fields[2], "duty")
    dl, dr = fields[3], fields[4]
    if dl not in DIR_CODES or dr not in DIR_CODES:
        raise ArgOutOfRange(f"direction {dl}/{dr}")
    pan = _int_field(fields[5], "pan")
    tilt = _int_field(fields[6], "tilt")
    leds_s = fields[7]
    if len(leds_s) != 2 or any(c not in "0123456789ABCDEF" for c in leds_s):
        raise Malformed(f"bad leds field {leds_s!r}")
    rssi = _int_field(fields[8], "rssi")
    pose = None
    if len(fields) == 12:
        pose = (
            _int_field(fields[9], "x"),
            _int_field(fields[10], "y"),
            _int_field(fields[11], "heading"),
        )
    frame = TelemetryFrame(seq, battery, duty, dl, dr, pan, tilt, int(leds_s, 16), rssi, pose)
    frame.validate()
    return frame


def decode_error(data: bytes | str) -> str:
    fields = _split_line(data, "E")
    if len(fields) != 1:
        raise Malformed(f"expected 1 error field, got {len(fields)}")
    if fields[0] not in ERROR_CODES:
        raise Malformed(f"unknown error code {fields[0]!r}")
    return fields[0]


def seq_at_least(seen: int, wanted: int) -> bool:
    """Wrap-aware 'seen >= wanted' over the 16-bit sequence space."""
    return (seen - wanted) % SEQ_MOD < SEQ_MOD // 2
