"""Framed-message endpoint for driving a session over a local socket.

This is the only module in the engine allowed to touch networking; the
privacy audit in the test suite enforces that. Wire format: 4-byte
little-endian length prefix + canonical JSON document with a "type" field.
Binary payloads travel base64-encoded inside frames.
"""

import json
import socket
import struct
import sys
import time

from .checkpoint import canonical_json
from .session import PROTOCOL_VERSION, Session

HEADER = struct.Struct("<I")
MAX_FRAME = 64 * 1024 * 1024
METRICS_INTERVAL = 0.1  # ≥10 Hz cap on TrainingMetrics, latest wins
PUMP_CHUNK = 4          # training steps between socket polls


def encode_frame(obj):
    payload = canonical_json(obj).encode("utf-8")
    return HEADER.pack(len(payload)) + payload


class FrameDecoder:
    """Incremental length-prefixed frame splitter."""

    def __init__(self):
        self._buf = b""

    def feed(self, data):
        self._buf += data
        frames = []
        while len(self._buf) >= HEADER.size:
            (n,) = HEADER.unpack_from(self._buf)
            if n > MAX_FRAME:
                raise ValueError("frame exceeds size limit")
            if len(self._buf) < HEADER.size + n:
                break
            payload = self._buf[HEADER.size:HEADER.size + n]
            self._buf = self._buf[HEADER.size + n:]
            frames.append(payload)
        return frames


class MetricsThrottle:
    """Coalesce TrainingMetrics to at most one per interval, latest wins;
    all other events pass straight through (flushing any pending metric
    first so step ordering is preserved)."""

    def __init__(self, interval=METRICS_INTERVAL):
        self.interval = interval
        self._pending = None
        self._last = 0.0

    def push(self, event):
        out = []
        if event.get("type") == "TrainingMetrics":
            self._pending = event
            now = time.monotonic()
            if now - self._last >= self.interval:
                out.append(self._pending)
                self._pending = None
                self._last = now
        else:
            out.extend(self.flush())
            out.append(event)
        return out

    def flush(self):
        if self._pending is None:
            return []
        e, self._pending = self._pending, None
        self._last = time.monotonic()
        return [e]


def handle_connection(conn, session=None):
    """Run one session over an established connection until Shutdown or
    disconnect."""
    try:
        _serve_session(conn, session)
    except OSError:
        # peer vanished mid-session; nothing to clean up beyond the socket
        pass


def _serve_session(conn, session):
    session = session or Session()
    decoder = FrameDecoder()
    throttle = MetricsThrottle()
    conn.sendall(encode_frame({"type": "Hello", "protocol_version": PROTOCOL_VERSION}))
    while not session.closed:
        training = session.phase == "training"
        conn.settimeout(0.0 if training else 0.2)
        try:
            data = conn.recv(65536)
            if data == b"":
                break
            frames = decoder.feed(data)
        except (TimeoutError, BlockingIOError):
            frames = []
        except ValueError:
            _send_events(conn, throttle,
                         [{"type": "Error", "code": "format-error",
                           "message": "oversized frame"}])
            break

        for payload in frames:
            try:
                cmd = json.loads(payload.decode("utf-8"))
                if not isinstance(cmd, dict):
                    raise ValueError("frame is not an object")
            except (ValueError, UnicodeDecodeError) as e:
                _send_events(conn, throttle,
                             [{"type": "Error", "code": "format-error",
                               "message": f"malformed frame: {e}"}])
                continue
            _send_events(conn, throttle, session.handle(cmd))

        if session.phase == "training":
            _send_events(conn, throttle, session.pump(max_steps=PUMP_CHUNK))
        _send_events(conn, throttle, [])


def _send_events(conn, throttle, events):
    out = []
    for e in events:
        out.extend(throttle.push(e))
    if not events and throttle._pending is not None and \
            time.monotonic() - throttle._last >= throttle.interval:
        out.extend(throttle.flush())
    for e in out:
        conn.sendall(encode_frame(e))


def serve(addr="127.0.0.1:7651", once=False):
    """Listen on host:port and serve sessions, one connection at a time."""
    host, _, port = addr.rpartition(":")
    srv = socket.create_server((host or "127.0.0.1", int(port)))
    # announce only once the socket is bound, so clients can wait on this line
    print(f"listening on {addr}", file=sys.stderr, flush=True)
    try:
        while True:
            conn, _peer = srv.accept()
            with conn:
                handle_connection(conn)
            if once:
                return
    finally:
        srv.close()
