"""Minimal server-side WebSocket (RFC 6455) over an already-accepted HTTP
connection: handshake, masked text frames in, unmasked text frames out.
Enough for the control endpoint's one-line messages; no extensions, no
compression."""

from __future__ import annotations

import base64
import hashlib
import struct

_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

OP_CONT = 0x0
OP_TEXT = 0x1
OP_BINARY = 0x2
OP_CLOSE = 0x8
OP_PING = 0x9
OP_PONG = 0xA


class WsClosed(Exception):
    pass


def accept_key(client_key: str) -> str:
    digest = hashlib.sha1((client_key + _GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


def is_upgrade_request(headers) -> bool:
    upgrade = (headers.get("Upgrade") or "").lower()
    connection = (headers.get("Connection") or "").lower()
    return upgrade == "websocket" and "upgrade" in connection


def _read_exact(rfile, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = rfile.read(n - len(buf))
        if not chunk:
            raise WsClosed("connection closed mid-frame")
        buf += chunk
    return buf


def read_frame(rfile) -> tuple[int, bool, bytes]:
    """Return (opcode, fin, payload) with the client mask removed."""
    head = _read_exact(rfile, 2)
    fin = bool(head[0] & 0x80)
    opcode = head[0] & 0x0F
    masked = bool(head[1] & 0x80)
    length = head[1] & 0x7F
    if length == 126:
        (length,) = struct.unpack("!H", _read_exact(rfile, 2))
    elif length == 127:
        (length,) = struct.unpack("!Q", _read_exact(rfile, 8))
    if length > 1 << 20:
        raise WsClosed(f"frame too large ({length} bytes)")
    mask = _read_exact(rfile, 4) if masked else b""
    payload = _read_exact(rfile, length)
    if masked:
        payload = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
    return opcode, fin, payload


def read_message(rfile, wfile) -> str | None:
    """Next complete text message; answers pings inline; None on close."""
    parts: list[bytes] = []
    while True:
        opcode, fin, payload = read_frame(rfile)
        if opcode == OP_CLOSE:
            return None
        if opcode == OP_PING:
            write_frame(wfile, OP_PONG, payload)
            continue
        if opcode == OP_PONG:
            continue
        if opcode in (OP_TEXT, OP_BINARY, OP_CONT):
            parts.append(payload)
            if fin:
                return b"".join(parts).decode("utf-8", errors="replace")
            continue
        raise WsClosed(f"unsupported opcode {opcode:#x}")


def write_frame(wfile, opcode: int, payload: bytes) -> None:
    header = bytes([0x80 | opcode])
    n = len(payload)
    if n < 126:
        header += bytes([n])
    elif n < 1 << 16:
        header += bytes([126]) + struct.pack("!H", n)
    else:
        header += bytes([127]) + struct.pack("!Q", n)
    wfile.write(header + payload)
    wfile.flush()


def send_text(wfile, text: str) -> None:
    write_frame(wfile, OP_TEXT, text.encode("utf-8"))


def send_close(wfile) -> None:
    write_frame(wfile, OP_CLOSE, b"")
