"""HTTP and UDP front ends for the edge hub.

HTTP (JSON bodies):
    GET  /health                                current HealthReport
    GET  /devices                               per-device session summaries
    GET  /segments/{device_id}                  stored segment metadata
    POST /recommend/session                     new dialog session
    POST /recommend/session/{id}/message        one user turn
    GET  /recommend/session/{id}                full session view (+graph)

Static UI files are served from an optional directory (GET /). The UDP
listener feeds raw datagrams through a queue into the hub so the receive
loop never blocks on decoding. Health reports can additionally be pushed
as JSON to a configured URL at a fixed period (the tunnel abstraction).
"""

from __future__ import annotations

import json
import mimetypes
import re
import socket
import threading
import time
import urllib.request
import uuid
from collections import deque
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Dict, Optional, Tuple

from .hub import EdgeHub
from .recommend.engine import DialogEngine, DialogState
from .recommend.schema import graph_to_dict

DEFAULT_UDP_PORT = 7453
DEFAULT_HTTP_PORT = 8750


class RecommendService:
    """Thread-safe session registry over one DialogEngine."""

    def __init__(self, engine: DialogEngine):
        self.engine = engine
        self.sessions: Dict[str, DialogState] = {}
        self._lock = threading.Lock()

    def create_session(self) -> Tuple[str, dict]:
        state, output = self.engine.start()
        sid = uuid.uuid4().hex
        with self._lock:
            self.sessions[sid] = state
        return sid, output.to_dict()

    def post_message(self, sid: str, message: str) -> dict:
        with self._lock:
            state = self.sessions.get(sid)
        if state is None:
            raise KeyError(sid)
        _, output = self.engine.step(state, message)
        return output.to_dict()

    def session_view(self, sid: str) -> dict:
        with self._lock:
            state = self.sessions.get(sid)
        if state is None:
            raise KeyError(sid)
        return {
            "session_id": sid,
            "phase": state.phase.value,
            "transcript": [t.to_dict() for t in state.transcript],
            "pending_question": state.pending_question,
            "cards": [r.to_dict() for r in state.ranked[: state.presented]],
            "selected": state.selected.to_dict() if state.selected else None,
            "graph": graph_to_dict(self.engine.graph),
        }


class _Handler(BaseHTTPRequestHandler):
    server_version = "vibesense-hub"

    # route table filled in by HubServer
    def _send_json(self, obj, status: int = 200) -> None:
        body = json.dumps(obj).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_error_json(self, status: int, message: str) -> None:
        self._send_json({"error": message}, status)

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length", 0))
        if length == 0:
            return {}
        return json.loads(self.rfile.read(length).decode("utf-8"))

    def do_GET(self):  # noqa: N802 (stdlib API)
        app: "HubServer" = self.server.app  # type: ignore[attr-defined]
        path = self.path.split("?", 1)[0]
        if path == "/health":
            return self._send_json(app.hub.health_report().to_dict())
        if path == "/devices":
            report = app.hub.health_report()
            return self._send_json([d.to_dict() for d in report.devices])
        m = re.fullmatch(r"/segments/(\d+)", path)
        if m:
            device_id = int(m.group(1))
            with app.hub._lock:
                sess = app.hub.sessions.get(device_id)
                if sess is None:
                    return self._send_error_json(404, f"unknown device {device_id}")
                meta = [
                    {
                        "index": i,
                        "start_sample_index": seg.start_sample_index,
                        "start_time_us": seg.start_time_us,
                        "nominal_rate_hz": seg.nominal_rate_hz,
                        "stored_samples": seg.n_stored,
                        "missing_samples": seg.n_missing,
                    }
                    for i, seg in enumerate(sess.all_segments())
                ]
            return self._send_json(meta)
        m = re.fullmatch(r"/recommend/session/([0-9a-f]+)", path)
        if m and app.recommend:
            try:
                return self._send_json(app.recommend.session_view(m.group(1)))
            except KeyError:
                return self._send_error_json(404, "unknown session")
        return self._serve_static(path)

    def do_POST(self):  # noqa: N802
        app: "HubServer" = self.server.app  # type: ignore[attr-defined]
        path = self.path.split("?", 1)[0]
        if app.recommend is None and path.startswith("/recommend"):
            return self._send_error_json(503, "recommendation service not configured")
        try:
            body = self._read_body()
        except (ValueError, json.JSONDecodeError):
            return self._send_error_json(400, "invalid JSON body")
        if path == "/recommend/session":
            sid, output = app.recommend.create_session()
            return self._send_json({"session_id": sid, "output": output})
        m = re.fullmatch(r"/recommend/session/([0-9a-f]+)/message", path)
        if m:
            message = body.get("message")
            if not isinstance(message, str) or not message.strip():
                return self._send_error_json(400, "body needs a non-empty 'message'")
            try:
                output = app.recommend.post_message(m.group(1), message)
            except KeyError:
                return self._send_error_json(404, "unknown session")
            except ValueError as err:
                return self._send_error_json(409, str(err))
            view = app.recommend.session_view(m.group(1))
            return self._send_json({"output": output, "phase": view["phase"]})
        return self._send_error_json(404, f"no route for POST {path}")

    def _serve_static(self, path: str):
        app: "HubServer" = self.server.app  # type: ignore[attr-defined]
        if app.ui_dir is None:
            return self._send_error_json(404, f"no route for GET {path}")
        rel = "index.html" if path == "/" else path.lstrip("/")
        target = (app.ui_dir / rel).resolve()
        if not str(target).startswith(str(app.ui_dir.resolve())) or not target.is_file():
            return self._send_error_json(404, f"no route for GET {path}")
        data = target.read_bytes()
        ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)


class HubServer:
    def __init__(
        self,
        hub: EdgeHub,
        host: str = "127.0.0.1",
        http_port: int = DEFAULT_HTTP_PORT,
        udp_port: Optional[int] = DEFAULT_UDP_PORT,
        recommend: Optional[RecommendService] = None,
        ui_dir: Optional[Path] = None,
        status_push_url: Optional[str] = None,
        status_push_period_s: float = 30.0,
    ):
        self.hub = hub
        self.host = host
        self.recommend = recommend
        self.ui_dir = Path(ui_dir) if ui_dir else None
        self.status_push_url = status_push_url
        self.status_push_period_s = status_push_period_s
        self.status_push_failures = 0

        self._httpd = ThreadingHTTPServer((host, http_port), _Handler)
        self._httpd.app = self  # type: ignore[attr-defined]
        self.http_port = self._httpd.server_address[1]

        self._udp_sock: Optional[socket.socket] = None
        self.udp_port: Optional[int] = None
        if udp_port is not None:
            sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
            sock.setsockopt(socket.SOL_SOCKET, socket.SO_RCVBUF, 8 * 1024 * 1024)
            sock.bind((host, udp_port))
            sock.settimeout(0.2)
            self._udp_sock = sock
            self.udp_port = sock.getsockname()[1]

        self._queue: deque = deque()
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []

    # -- lifecycle ----------------------------------------------------------

    def start(self) -> None:
        self._threads = [
            threading.Thread(target=self._httpd.serve_forever, daemon=True)
        ]
        if self._udp_sock is not None:
            self._threads.append(threading.Thread(target=self._udp_loop, daemon=True))
            self._threads.append(threading.Thread(target=self._ingest_loop, daemon=True))
        if self.status_push_url:
            self._threads.append(threading.Thread(target=self._push_loop, daemon=True))
        for t in self._threads:
            t.start()

    def stop(self) -> None:
        self._stop.set()
        self._httpd.shutdown()
        self.drain()
        if self._udp_sock is not None:
            self._udp_sock.close()

    def drain(self, timeout_s: float = 5.0) -> None:
        """Block until the ingest queue is empty (tests and shutdown)."""
        deadline = time.monotonic() + timeout_s
        while self._queue and time.monotonic() < deadline:
            time.sleep(0.005)

    # -- workers -------------------------------------------------------------

    def _udp_loop(self) -> None:
        sock = self._udp_sock
        q = self._queue
        while not self._stop.is_set():
            try:
                data = sock.recv(2048)
            except socket.timeout:
                continue
            except OSError:
                break
            q.append((data, time.monotonic_ns() // 1000))

    def _ingest_loop(self) -> None:
        q = self._queue
        while not self._stop.is_set() or q:
            if not q:
                time.sleep(0.001)
                continue
            data, arrival_us = q.popleft()
            self.hub.ingest(data, arrival_us)

    def _push_loop(self) -> None:
        while not self._stop.wait(self.status_push_period_s):
            body = json.dumps(self.hub.health_report().to_dict()).encode("utf-8")
            req = urllib.request.Request(
                self.status_push_url,
                data=body,
                headers={"Content-Type": "application/json"},
            )
            try:
                urllib.request.urlopen(req, timeout=5.0).read()
            except OSError:
                self.status_push_failures += 1
