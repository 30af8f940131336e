"""The gateway service: hosts the tick loop, terminates operator sessions
(WebSocket /ctl and a raw-TCP twin one port up), serves the MJPEG stream,
snapshots and diagnostics, and records missions.

One tick thread owns all mutable simulation state.  Network sessions hand
value messages to the core through queues and read immutable snapshots;
video rendering runs on a worker fed by snapshots.
"""

from __future__ import annotations

import io
import json
import logging
import mimetypes
import os
import queue
import socket
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from PIL import Image

from . import protocol, ws
from .config import GatewayConfig
from .sim import SimCore, SimSnapshot
from .video import render_frame
from .world import default_desk_world, format_world, load_world

log = logging.getLogger(__name__)

MJPEG_BOUNDARY = "roverframe"
JPEG_QUALITY = 80
SESSION_QUEUE_DEPTH = 64


class CtlSession:
    """One operator connection; all writes go through a single writer thread
    so telemetry fanout never blocks the tick loop."""

    _ids = iter(range(1, 1 << 30))

    def __init__(self, write_line, on_close):
        self.id = next(self._ids)
        self._write_line = write_line
        self._on_close = on_close
        self._outbound: queue.Queue[bytes | None] = queue.Queue(maxsize=SESSION_QUEUE_DEPTH)
        self._closed = threading.Event()
        self._writer = threading.Thread(target=self._drain, daemon=True,
                                        name=f"ctl-writer-{self.id}")
        self._writer.start()

    def offer(self, line: bytes) -> None:
        """Non-blocking enqueue; a slow client loses its oldest lines."""
        if self._closed.is_set():
            return
        while True:
            try:
                self._outbound.put_nowait(line)
                return
            except queue.Full:
                try:
                    self._outbound.get_nowait()
                except queue.Empty:
                    pass

    def _drain(self) -> None:
        while not self._closed.is_set():
            try:
                line = self._outbound.get(timeout=0.25)
            except queue.Empty:
                continue
            if line is None:
                break
            try:
                self._write_line(line)
            except (OSError, ValueError):
                self.close()
                return

    def close(self) -> None:
        if not self._closed.is_set():
            self._closed.set()
            try:
                self._outbound.put_nowait(None)
            except queue.Full:
                pass
            self._on_close(self)


class _Mailbox:
    """Latest-frame handoff to one video client: at most one part in flight."""

    def __init__(self):
        self._q: queue.Queue[tuple[bytes, int]] = queue.Queue(maxsize=1)

    def offer(self, item: tuple[bytes, int]) -> None:
        while True:
            try:
                self._q.put_nowait(item)
                return
            except queue.Full:
                try:
                    self._q.get_nowait()
                except queue.Empty:
                    pass

    def take(self, timeout: float) -> tuple[bytes, int] | None:
        try:
            return self._q.get(timeout=timeout)
        except queue.Empty:
            return None


def encode_jpeg(pixels: bytes, width: int, height: int) -> bytes:
    img = Image.frombytes("RGB", (width, height), pixels)
    out = io.BytesIO()
    img.save(out, format="JPEG", quality=JPEG_QUALITY)
    return out.getvalue()


class GatewayServer:
    def __init__(self, cfg: GatewayConfig):
        self.cfg = cfg
        if cfg.world_file:
            self.world = load_world(cfg.world_file)
            with open(cfg.world_file, "r", encoding="utf-8") as f:
                world_text = f.read()
        else:
            self.world = default_desk_world()
            world_text = format_world(self.world)
        sink = open(cfg.mission_log, "w", encoding="utf-8") if cfg.mission_log else None
        self.sim = SimCore(cfg, self.world, mission_sink=sink, world_text=world_text)
        self.sim.add_telemetry_listener(self._fanout_telemetry)
        self.sim.add_frame_listener(self._on_frame_emitted)

        self._stop = threading.Event()
        self._sessions: list[CtlSession] = []
        self._sessions_lock = threading.Lock()
        self._video_clients: list[_Mailbox] = []
        self._video_lock = threading.Lock()
        self._render_inbox = _Mailbox()
        self._latest_render_snap: SimSnapshot | None = None
        self._step_queue: queue.Queue[tuple[float, threading.Event]] = queue.Queue()

        handler = _make_handler(self)
        self._http = ThreadingHTTPServer((cfg.listen_host, cfg.listen_port), handler)
        self._http.daemon_threads = True
        self.http_port = self._http.server_address[1]
        self._ctl_listener = socket.create_server((cfg.listen_host, cfg.ctl_port))
        self.ctl_port = self._ctl_listener.getsockname()[1]
        self._threads: list[threading.Thread] = []

    # -- lifecycle --------------------------------------------------------

    def start(self) -> None:
        for name, target in (
            ("http", self._http.serve_forever),
            ("ctl-accept", self._accept_ctl_loop),
            ("render", self._render_loop),
            ("tick", self._tick_loop),
        ):
            t = threading.Thread(target=target, daemon=True, name=name)
            t.start()
            self._threads.append(t)
        log.info("gateway up http=%s:%s ctl=%s:%s", self.cfg.listen_host, self.http_port,
                 self.cfg.listen_host, self.ctl_port)

    def banner(self) -> str:
        mode = "fast" if self.cfg.fast else "realtime"
        return (f"roversim gateway http={self.cfg.listen_host}:{self.http_port} "
                f"ctl={self.cfg.listen_host}:{self.ctl_port} "
                f"network={self.cfg.network_name} mode={mode}")

    def stop(self) -> None:
        self._stop.set()
        self._http.shutdown()
        try:
            self._ctl_listener.close()
        except OSError:
            pass
        with self._sessions_lock:
            sessions = list(self._sessions)
        for s in sessions:
            s.close()
        for t in self._threads:
            t.join(timeout=1.0)
        self.sim.mission.close()

    def wait(self) -> None:
        try:
            while not self._stop.is_set():
                time.sleep(0.2)
        except KeyboardInterrupt:
            pass

    # -- tick thread --------------------------------------------------------

    def _tick_loop(self) -> None:
        if self.cfg.fast:
            self._tick_loop_fast()
        else:
            self._tick_loop_realtime()

    def _tick_loop_realtime(self) -> None:
        dt = self.cfg.tick_dt
        start = time.monotonic()
        n = 0
        while not self._stop.is_set():
            if self.cfg.run_for_s is not None and self.sim.sim_time >= self.cfg.run_for_s:
                self._stop.wait(0.05)
                continue
            n += 1
            lag = start + n * dt - time.monotonic()
            if lag > 0:
                if self._stop.wait(lag):
                    return
            self.sim.tick()

    def _tick_loop_fast(self) -> None:
        while not self._stop.is_set():
            try:
                target, done = self._step_queue.get(timeout=0.1)
            except queue.Empty:
                continue
            if self.cfg.run_for_s is not None:
                target = min(target, self.cfg.run_for_s)
            self.sim.run_until(target)
            done.set()

    def step_until(self, sim_time_s: float, timeout: float = 120.0) -> SimSnapshot:
        if not self.cfg.fast:
            raise RuntimeError("stepping requires fast mode")
        done = threading.Event()
        self._step_queue.put((sim_time_s, done))
        if not done.wait(timeout):
            raise TimeoutError("step did not complete")
        return self.sim.snapshot()

    # -- fanout -------------------------------------------------------------

    def _fanout_telemetry(self, line: bytes) -> None:
        with self._sessions_lock:
            sessions = list(self._sessions)
        for s in sessions:
            s.offer(line)

    def _on_frame_emitted(self, snap: SimSnapshot, frame_seq: int, delay: float | None) -> None:
        if delay is None:
            return  # dropped by the link: no client sees this frame
        with self._video_lock:
            have_clients = bool(self._video_clients)
        if have_clients:
            self._render_inbox.offer((b"", frame_seq))
            self._latest_render_snap = snap

    def _render_loop(self) -> None:
        while not self._stop.is_set():
            item = self._render_inbox.take(timeout=0.25)
            if item is None:
                continue
            _, frame_seq = item
            snap = self._latest_render_snap
            if snap is None:
                continue
            fb = render_frame(self.world, snap.pose, snap.pan_deg, snap.tilt_deg,
                              self.cfg.render, frame_seq=frame_seq,
                              sim_time_s=snap.sim_time_s)
            jpeg = encode_jpeg(fb.pixels, fb.width_px, fb.height_px)
            with self._video_lock:
                clients = list(self._video_clients)
            for mb in clients:
                mb.offer((jpeg, frame_seq))

    # -- session plumbing ---------------------------------------------------

    def register_session(self, write_line) -> CtlSession:
        session = CtlSession(write_line, self._unregister_session)
        with self._sessions_lock:
            self._sessions.append(session)
        return session

    def _unregister_session(self, session: CtlSession) -> None:
        with self._sessions_lock:
            if session in self._sessions:
                self._sessions.remove(session)

    def register_video_client(self) -> _Mailbox:
        mb = _Mailbox()
        with self._video_lock:
            self._video_clients.append(mb)
        return mb

    def unregister_video_client(self, mb: _Mailbox) -> None:
        with self._video_lock:
            if mb in self._video_clients:
                self._video_clients.remove(mb)

    def session_counts(self) -> tuple[int, int]:
        with self._sessions_lock:
            n_ctl = len(self._sessions)
        with self._video_lock:
            n_vid = len(self._video_clients)
        return n_ctl, n_vid

    def handle_ctl_line(self, raw: str, session: CtlSession) -> None:
        """Decode one inbound line; enqueue valid frames, answer bad ones."""
        line = raw if raw.endswith("\n") else raw + "\n"
        try:
            frame = protocol.decode_command(line)
        except protocol.ProtocolError as e:
            session.offer(protocol.encode_error(e.code))
            return
        self.sim.submit_live(frame, len(line.encode("latin-1")))

    def schedule_script(self, body: str) -> list[dict]:
        """Parse 'AT <t> <frame line>' entries; atomic: any bad line rejects
        the whole batch (raises ValueError)."""
        entries: list[tuple[float, protocol.CommandFrame, int]] = []
        results = []
        for i, raw_line in enumerate(body.split("\n"), 1):
            line = raw_line.strip("\r")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split(" ", 2)
            if len(parts) != 3 or parts[0] != "AT":
                raise ValueError(f"line {i}: expected 'AT <seconds> <frame>'")
            try:
                at_s = float(parts[1])
            except ValueError:
                raise ValueError(f"line {i}: bad time {parts[1]!r}") from None
            frame_line = parts[2] if parts[2].endswith("\n") else parts[2] + "\n"
            try:
                frame = protocol.decode_command(frame_line)
            except protocol.ProtocolError as e:
                raise ValueError(f"line {i}: {e.code}: {e}") from None
            entries.append((at_s, frame, len(frame_line.encode("latin-1"))))
            results.append({"at_s": at_s, "seq": frame.seq, "verb": frame.verb})
        for at_s, frame, wire_len in entries:
            self.sim.schedule(at_s, frame, wire_len)
        return results

    # -- raw TCP control -----------------------------------------------------

    def _accept_ctl_loop(self) -> None:
        self._ctl_listener.settimeout(0.25)
        while not self._stop.is_set():
            try:
                conn, addr = self._ctl_listener.accept()
            except socket.timeout:
                continue
            except OSError:
                return  # listener closed
            t = threading.Thread(target=self._serve_ctl_conn, args=(conn,),
                                 daemon=True, name=f"ctl-tcp-{addr[1]}")
            t.start()

    def _serve_ctl_conn(self, conn: socket.socket) -> None:
        rfile = conn.makefile("rb")
        wfile = conn.makefile("wb")

        def write_line(line: bytes) -> None:
            wfile.write(line)
            wfile.flush()

        if self.cfg.auth_token:
            first = rfile.readline().decode("utf-8", errors="replace").strip()
            if first != f"AUTH {self.cfg.auth_token}":
                try:
                    write_line(b"E AuthRequired\n")
                finally:
                    conn.close()
                return
        session = self.register_session(write_line)
        try:
            for raw in rfile:
                self.handle_ctl_line(raw.decode("latin-1"), session)
        except OSError:
            pass
        finally:
            session.close()
            try:
                conn.close()
            except OSError:
                pass


def _make_handler(gw: GatewayServer):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
            log.debug("http %s " + fmt, self.client_address[0], *args)

        # ---- helpers ----

        def _authorized(self) -> bool:
            token = gw.cfg.auth_token
            if not token:
                return True
            if self.headers.get("X-Auth-Token") == token:
                return True
            q = parse_qs(urlparse(self.path).query)
            return q.get("token", [None])[0] == token

        def _send_json(self, obj, code=200) -> None:
            body = json.dumps(obj, sort_keys=True).encode("utf-8")
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(body)

        def _send_text(self, text: str, code=200, content_type="text/plain; charset=utf-8"):
            body = text.encode("utf-8")
            self.send_response(code)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        # ---- GET ----

        def do_GET(self):
            if not self._authorized():
                self._send_text("unauthorized\n", code=401)
                return
            path = urlparse(self.path).path
            if path == "/status":
                self._send_json(self._status_obj())
            elif path == "/snapshot":
                self._serve_snapshot()
            elif path == "/video":
                self._serve_video()
            elif path == "/ctl":
                self._serve_ctl_ws()
            else:
                self._serve_static(path)

        def _status_obj(self) -> dict:
            snap = gw.sim.snapshot()
            n_ctl, n_vid = gw.session_counts()
            obj = {
                "network_name": gw.cfg.network_name,
                "mode": "fast" if gw.cfg.fast else "realtime",
                "ctl_port": gw.ctl_port,
                "run_for_s": gw.cfg.run_for_s,
                "sim_time_s": snap.sim_time_s,
                "tick": snap.tick,
                "battery_pct": snap.battery_pct,
                "speed_setting": snap.speed_setting,
                "dir_left": snap.dir_left,
                "dir_right": snap.dir_right,
                "leds_mask": snap.leds_mask,
                "watchdog_engaged": snap.watchdog_engaged,
                "rssi_dbm": snap.rssi_dbm,
                "distance_to_base_m": snap.distance_to_base_m,
                "last_applied_seq": snap.last_applied_seq,
                "first_dropped_seq": snap.first_dropped_seq,
                "frame_seq": snap.frame_seq,
                "commands_received": snap.commands_received,
                "uplink": snap.uplink,
                "downlink": snap.downlink,
                "clients": {"ctl": n_ctl, "video": n_vid},
            }
            if gw.cfg.debug_pose_in_telemetry:
                obj["pose"] = {
                    "x_m": snap.pose.x_m,
                    "y_m": snap.pose.y_m,
                    "heading_rad": snap.pose.heading_rad,
                }
            return obj

        def _serve_snapshot(self):
            snap = gw.sim.snapshot()
            fb = render_frame(gw.world, snap.pose, snap.pan_deg, snap.tilt_deg,
                              gw.cfg.render, frame_seq=snap.frame_seq,
                              sim_time_s=snap.sim_time_s)
            jpeg = encode_jpeg(fb.pixels, fb.width_px, fb.height_px)
            self.send_response(200)
            self.send_header("Content-Type", "image/jpeg")
            self.send_header("Content-Length", str(len(jpeg)))
            self.end_headers()
            self.wfile.write(jpeg)

        def _serve_video(self):
            self.close_connection = True
            self.send_response(200)
            self.send_header("Content-Type",
                             f"multipart/x-mixed-replace; boundary={MJPEG_BOUNDARY}")
            self.send_header("Cache-Control", "no-store")
            self.end_headers()
            mailbox = gw.register_video_client()
            try:
                while not gw._stop.is_set():
                    item = mailbox.take(timeout=0.5)
                    if item is None:
                        continue
                    jpeg, frame_seq = item
                    part = (f"--{MJPEG_BOUNDARY}\r\n"
                            f"Content-Type: image/jpeg\r\n"
                            f"Content-Length: {len(jpeg)}\r\n"
                            f"X-Frame-Seq: {frame_seq}\r\n\r\n").encode("ascii")
                    self.wfile.write(part + jpeg + b"\r\n")
                    self.wfile.flush()
            except OSError:
                pass  # client went away; only this stream dies
            finally:
                gw.unregister_video_client(mailbox)

        def _serve_ctl_ws(self):
            key = self.headers.get("Sec-WebSocket-Key")
            if not ws.is_upgrade_request(self.headers) or not key:
                self._send_text("expected a WebSocket upgrade on /ctl\n", code=400)
                return
            self.send_response(101, "Switching Protocols")
            self.send_header("Upgrade", "websocket")
            self.send_header("Connection", "Upgrade")
            self.send_header("Sec-WebSocket-Accept", ws.accept_key(key))
            self.end_headers()
            self.close_connection = True

            lock = threading.Lock()

            def write_line(line: bytes) -> None:
                with lock:
                    ws.send_text(self.wfile, line.decode("latin-1"))

            session = gw.register_session(write_line)
            try:
                while not gw._stop.is_set():
                    msg = ws.read_message(self.rfile, self.wfile)
                    if msg is None:
                        break
                    gw.handle_ctl_line(msg, session)
            except (ws.WsClosed, OSError):
                pass
            finally:
                session.close()

        def _serve_static(self, path: str):
            if path == "/" and not gw.cfg.ui_dir:
                self._send_text(
                    f"roversim gateway\n"
                    f"network: {gw.cfg.network_name} (open, no password)\n"
                    f"endpoints: /ctl (websocket), /video, /snapshot, /status\n"
                    f"raw tcp control on port {gw.ctl_port}\n")
                return
            if not gw.cfg.ui_dir:
                self._send_text("not found\n", code=404)
                return
            rel = "index.html" if path == "/" else path.lstrip("/")
            root = os.path.realpath(gw.cfg.ui_dir)
            full = os.path.realpath(os.path.join(root, rel))
            if not full.startswith(root + os.sep) and full != root:
                self._send_text("not found\n", code=404)
                return
            if not os.path.isfile(full):
                self._send_text("not found\n", code=404)
                return
            ctype = mimetypes.guess_type(full)[0] or "application/octet-stream"
            with open(full, "rb") as f:
                body = f.read()
            self.send_response(200)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        # ---- POST ----

        def do_POST(self):
            if not self._authorized():
                self._send_text("unauthorized\n", code=401)
                return
            parsed = urlparse(self.path)
            if parsed.path == "/step":
                self._post_step(parse_qs(parsed.query))
            elif parsed.path == "/schedule":
                self._post_schedule()
            else:
                self._send_text("not found\n", code=404)

        def _post_step(self, q):
            if not gw.cfg.fast:
                self._send_json({"error": "stepping requires fast mode"}, code=409)
                return
            try:
                if "until" in q:
                    target = float(q["until"][0])
                elif "ticks" in q:
                    target = gw.sim.sim_time + int(q["ticks"][0]) * gw.cfg.tick_dt
                else:
                    raise ValueError("need until= or ticks=")
            except ValueError as e:
                self._send_json({"error": str(e)}, code=400)
                return
            snap = gw.step_until(target)
            self._send_json({"sim_time_s": snap.sim_time_s, "tick": snap.tick})

        def _post_schedule(self):
            length = int(self.headers.get("Content-Length") or 0)
            body = self.rfile.read(length).decode("utf-8", errors="replace")
            try:
                results = gw.schedule_script(body)
            except ValueError as e:
                self._send_json({"error": str(e)}, code=400)
                return
            self._send_json({"accepted": len(results), "results": results,
                             "sim_time_s": gw.sim.sim_time})

    return Handler


def run(cfg: GatewayConfig) -> int:
    """Start the gateway and serve until interrupted."""
    try:
        gw = GatewayServer(cfg)
    except (OSError, ValueError) as e:  # bad port, unreadable or invalid world
        print(f"gateway startup failed: {e}", flush=True)
        return 2
    gw.start()
    print(gw.banner(), flush=True)
    gw.wait()
    gw.stop()
    return 0
