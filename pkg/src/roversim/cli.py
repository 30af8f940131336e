"""Headless operator and test driver: run the gateway, send single commands,
replay drive scripts, inspect stats, grab snapshots, replay mission logs.

Output is line-oriented and stable; scripts can parse every line.
"""

from __future__ import annotations

import argparse
import json
import math
import socket
import sys
import time
import urllib.error
import urllib.request
from dataclasses import dataclass

from . import protocol, server
from .config import ConfigError, GatewayConfig, apply_overrides, load_config
from .mission import read_mission
from .protocol import CommandFrame, TelemetryFrame
from .sim import replay_mission
from .world import load_world

SEND_TIMEOUT_S = 2.0

EXIT_OK = 0
EXIT_DROPPED = 1
EXIT_USAGE = 2
EXIT_LINK_TIMEOUT = 3
EXIT_GATEWAY_DEAD = 4

_MOV_LETTERS = {"F": 0, "B": 1, "L": 2, "R": 3}


@dataclass(frozen=True)
class DriveScript:
    steps: list  # of (at_s: float, command_text: str)


class ScriptError(ValueError):
    pass


def parse_command_text(text: str) -> tuple[str, int]:
    """'SPD 128' / 'MOV F' / 'STP' -> (verb, arg); raises ProtocolError."""
    parts = text.split()
    if not parts:
        raise protocol.Malformed("empty command")
    verb = parts[0].upper()
    if verb not in protocol.VERBS:
        raise protocol.UnknownVerb(f"unknown verb {verb!r}")
    if len(parts) == 1:
        arg = 0
    elif len(parts) == 2:
        raw = parts[1].upper()
        if verb == "MOV" and raw in _MOV_LETTERS:
            arg = _MOV_LETTERS[raw]
        else:
            try:
                arg = int(parts[1])
            except ValueError:
                raise protocol.Malformed(f"bad argument {parts[1]!r}") from None
    else:
        raise protocol.Malformed(f"too many fields in {text!r}")
    CommandFrame(verb, arg, 0).validate()
    return verb, arg


def parse_script(text: str) -> DriveScript:
    steps = []
    last_at = -math.inf
    for lineno, raw in enumerate(text.split("\n"), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split(None, 2)
        if len(parts) < 3 or parts[0] != "AT":
            raise ScriptError(f"line {lineno}: expected 'AT <seconds> <command>'")
        try:
            at_s = float(parts[1])
        except ValueError:
            raise ScriptError(f"line {lineno}: bad time {parts[1]!r}") from None
        if at_s <= last_at:
            raise ScriptError(f"line {lineno}: times must be strictly increasing")
        last_at = at_s
        try:
            parse_command_text(parts[2])
        except protocol.ProtocolError as e:
            raise ScriptError(f"line {lineno}: {e.code}: {e}") from None
        steps.append((at_s, parts[2]))
    return DriveScript(steps)


def format_telemetry_line(t: TelemetryFrame) -> str:
    line = (f"telemetry seq={t.seq} battery={t.battery_pct} duty={t.duty} "
            f"dir={t.dir_left}/{t.dir_right} pan={t.pan_deg} tilt={t.tilt_deg} "
            f"leds={t.leds:02X} rssi={t.rssi_dbm}")
    if t.pose is not None:
        line += f" x_cm={t.pose[0]} y_cm={t.pose[1]} h_cdeg={t.pose[2]}"
    return line


# -- HTTP plumbing ----------------------------------------------------------


def http_get_json(address: str, path: str, timeout: float = 3.0) -> dict:
    with urllib.request.urlopen(f"http://{address}{path}", timeout=timeout) as resp:
        return json.loads(resp.read().decode("utf-8"))


def http_post(address: str, path: str, body: bytes = b"", timeout: float = 150.0) -> dict:
    req = urllib.request.Request(f"http://{address}{path}", data=body, method="POST")
    with urllib.request.urlopen(req, timeout=timeout) as resp:
        return json.loads(resp.read().decode("utf-8"))


def fetch_status(address: str) -> dict | None:
    try:
        return http_get_json(address, "/status")
    except (urllib.error.URLError, OSError, json.JSONDecodeError):
        return None


# -- subcommands -------------------------------------------------------------


def cmd_gateway(args) -> int:
    try:
        cfg = load_config(args.config) if args.config else GatewayConfig()
        cfg = apply_overrides(cfg, world=args.world, seed=args.seed, port=args.port,
                              fast=args.fast, mission_log=args.mission_log,
                              run_for_s=args.run_for)
    except (ConfigError, OSError) as e:
        print(f"gateway config error: {e}")
        return EXIT_USAGE
    try:
        return server.run(cfg)
    except FileNotFoundError as e:
        print(f"gateway startup failed: {e}")
        return EXIT_USAGE


def _connect_ctl(address: str, status: dict) -> socket.socket:
    host = address.rsplit(":", 1)[0]
    ctl_port = status["ctl_port"]
    return socket.create_connection((host, ctl_port), timeout=SEND_TIMEOUT_S)


def cmd_send(args) -> int:
    text = " ".join(args.command)
    try:
        verb, arg = parse_command_text(text)
    except protocol.ProtocolError as e:
        print(f"send error {e.code}: {e}")
        return EXIT_USAGE
    frame = CommandFrame(verb, arg, args.seq)
    line = protocol.encode_command(frame)

    status = fetch_status(args.address)
    if status is None:
        print(f"send error ConnectionRefused: no gateway at {args.address}")
        return EXIT_GATEWAY_DEAD
    try:
        conn = _connect_ctl(args.address, status)
    except OSError as e:
        print(f"send error ConnectionRefused: {e}")
        return EXIT_GATEWAY_DEAD
    try:
        conn.sendall(line)
        deadline = time.monotonic() + SEND_TIMEOUT_S
        rfile = conn.makefile("rb")
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise TimeoutError
            conn.settimeout(remaining)
            raw = rfile.readline()
            if not raw:
                raise TimeoutError
            try:
                t = protocol.decode_telemetry(raw)
            except protocol.ProtocolError:
                try:
                    code = protocol.decode_error(raw)
                    print(f"send rejected {code}")
                    return EXIT_USAGE
                except protocol.ProtocolError:
                    continue
            if protocol.seq_at_least(t.seq, frame.seq):
                print(format_telemetry_line(t))
                return EXIT_OK
    except (TimeoutError, socket.timeout):
        if fetch_status(args.address) is not None:
            print("send error Timeout: gateway alive, frame likely dropped by the link")
            return EXIT_LINK_TIMEOUT
        print("send error Timeout: gateway unreachable")
        return EXIT_GATEWAY_DEAD
    finally:
        conn.close()


def cmd_drive(args) -> int:
    try:
        with open(args.script, "r", encoding="utf-8") as f:
            script = parse_script(f.read())
    except (OSError, ScriptError) as e:
        print(f"drive script error: {e}")
        return EXIT_USAGE
    if not script.steps:
        print("drive script empty steps=0")
        print("drive result OK")
        return EXIT_OK

    status = fetch_status(args.address)
    if status is None:
        print(f"drive error ConnectionRefused: no gateway at {args.address}")
        return EXIT_GATEWAY_DEAD
    fast = status["mode"] == "fast"
    if args.fast and not fast:
        print("drive error: --fast requested but the gateway runs in realtime mode")
        return EXIT_USAGE

    frames = []
    body_lines = []
    for i, (at_s, text) in enumerate(script.steps):
        verb, arg = parse_command_text(text)
        frame = CommandFrame(verb, arg, (i + 1) % protocol.SEQ_MOD)
        frames.append((at_s, text, frame))
        wire = protocol.encode_command(frame).decode("ascii").rstrip("\n")
        body_lines.append(f"AT {at_s} {wire}")

    before_up = status["uplink"]
    late = [at for at, _, _ in frames if at <= status["sim_time_s"]]
    if late:
        print(f"drive warning: {len(late)} step(s) are already in the past "
              f"(sim_time={status['sim_time_s']:.3f})")

    try:
        http_post(args.address, "/schedule", "\n".join(body_lines).encode("utf-8"))
    except urllib.error.HTTPError as e:
        print(f"drive schedule rejected: {e.read().decode('utf-8', 'replace').strip()}")
        return EXIT_USAGE
    except (urllib.error.URLError, OSError) as e:
        print(f"drive error ConnectionRefused: {e}")
        return EXIT_GATEWAY_DEAD

    t_end = script.steps[-1][0] + args.tail
    if fast:
        http_post(args.address, f"/step?until={t_end}")
    else:
        while True:
            status_now = fetch_status(args.address)
            if status_now is None:
                print("drive error: gateway went away mid-run")
                return EXIT_GATEWAY_DEAD
            run_for = status_now.get("run_for_s")
            if status_now["sim_time_s"] >= t_end:
                break
            if run_for is not None and status_now["sim_time_s"] >= run_for:
                break
            time.sleep(0.1)

    final = fetch_status(args.address)
    if final is None:
        print("drive error: gateway went away before the summary")
        return EXIT_GATEWAY_DEAD
    up = final["uplink"]
    sent = up["sent"] - before_up["sent"]
    delivered = up["delivered"] - before_up["delivered"]
    dropped = up["dropped"] - before_up["dropped"]
    print(f"drive script={args.script} steps={len(script.steps)}")
    print(f"drive uplink sent={sent} delivered={delivered} dropped={dropped}")
    if "pose" in final:
        p = final["pose"]
        print(f"drive final pose x={p['x_m']:.6f} y={p['y_m']:.6f} "
              f"heading_deg={math.degrees(p['heading_rad']):.3f}")
    print(f"drive link rssi={final['rssi_dbm']:.1f} distance={final['distance_to_base_m']:.2f}")
    if dropped == 0 and delivered == len(script.steps):
        print("drive result OK")
        return EXIT_OK
    first_seq = final.get("first_dropped_seq")
    step_note = ""
    if first_seq is not None and 1 <= first_seq <= len(frames):
        at_s, text, _ = frames[first_seq - 1]
        step_note = f" first_failed_step={first_seq} (AT {at_s:g} {text})"
    print(f"drive result DROPPED{step_note}")
    return EXIT_DROPPED


def cmd_stats(args) -> int:
    status = fetch_status(args.address)
    if status is None:
        print(f"stats error ConnectionRefused: no gateway at {args.address}")
        return EXIT_GATEWAY_DEAD
    for key in sorted(status):
        print(f"{key} = {json.dumps(status[key], sort_keys=True)}")
    return EXIT_OK


def cmd_snapshot(args) -> int:
    try:
        with urllib.request.urlopen(f"http://{args.address}/snapshot", timeout=10.0) as resp:
            data = resp.read()
    except (urllib.error.URLError, OSError) as e:
        print(f"snapshot error ConnectionRefused: {e}")
        return EXIT_GATEWAY_DEAD
    with open(args.out, "wb") as f:
        f.write(data)
    print(f"snapshot wrote {len(data)} bytes to {args.out}")
    return EXIT_OK


def cmd_replay(args) -> int:
    try:
        records = read_mission(args.log)
    except (OSError, ValueError) as e:
        print(f"replay error: cannot read {args.log}: {e}")
        return EXIT_USAGE
    if not records or records[0].kind != "Header":
        print("replay error: log has no Header record")
        return EXIT_USAGE
    world_path = args.world or records[0].detail["world"]["file"]
    if not world_path:
        print("replay error: no world file recorded; pass --world")
        return EXIT_USAGE
    try:
        world = load_world(world_path)
    except (OSError, ValueError) as e:
        print(f"replay error: cannot load world {world_path}: {e}")
        return EXIT_USAGE
    trajectory = replay_mission(records, world)
    last_tick = max(trajectory)
    pose = trajectory[last_tick]
    print(f"replay ticks={last_tick} final x={pose.x_m:.9f} y={pose.y_m:.9f} "
          f"heading={pose.heading_rad:.9f}")
    worst = 0.0
    checked = 0
    for rec in records:
        if rec.kind == "Telemetry" and rec.tick in trajectory:
            p = trajectory[rec.tick]
            worst = max(worst, abs(p.x_m - rec.detail["x"]), abs(p.y_m - rec.detail["y"]))
            checked += 1
    print(f"replay checked={checked} max_pose_deviation={worst:.3e}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="roversim",
                                     description="Wi-Fi rover simulator and operator CLI")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("gateway", help="run the gateway service")
    p.add_argument("--config", help="config file path")
    p.add_argument("--world", help="world map file")
    p.add_argument("--seed", type=int, help="link RNG seed")
    p.add_argument("--fast", action="store_true", help="tick only under POST /step")
    p.add_argument("--port", type=int, help="HTTP port (0 = ephemeral); ctl rides one above")
    p.add_argument("--mission-log", help="mission log output path")
    p.add_argument("--run-for", type=float, help="stop ticking at this sim time")
    p.set_defaults(fn=cmd_gateway)

    p = sub.add_parser("send", help="send one command and await its telemetry echo")
    p.add_argument("address", help="gateway host:port (HTTP)")
    p.add_argument("command", nargs="+", help="e.g. MOV F | SPD 128 | STP")
    p.add_argument("--seq", type=int, default=1)
    p.set_defaults(fn=cmd_send)

    p = sub.add_parser("drive", help="run a drive script")
    p.add_argument("address")
    p.add_argument("--script", required=True, help="AT <seconds> <command> per line")
    p.add_argument("--fast", action="store_true", help="require fast-mode stepping")
    p.add_argument("--tail", type=float, default=2.0,
                   help="extra sim seconds after the last step")
    p.set_defaults(fn=cmd_drive)

    p = sub.add_parser("stats", help="print gateway diagnostics")
    p.add_argument("address")
    p.set_defaults(fn=cmd_stats)

    p = sub.add_parser("snapshot", help="fetch one camera frame")
    p.add_argument("address")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_snapshot)

    p = sub.add_parser("replay", help="reconstruct a mission log's trajectory")
    p.add_argument("log")
    p.add_argument("--world", help="world file override")
    p.set_defaults(fn=cmd_replay)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
