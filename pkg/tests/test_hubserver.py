import json
import socket
import threading
import time
import urllib.error
import urllib.request
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest

from vibesense import devicesim as ds, hubserver
from vibesense.devicesim import ActivityKind, ActivityScript, ClockModel, NoiseModel, ScriptEntry
from vibesense.hub import EdgeHub, HubConfig
from vibesense.recommend.engine import DialogEngine
from vibesense.recommend.schema import SensorSpec, parse_environment


@pytest.fixture
def server(fixture_home_doc):
    engine = DialogEngine(parse_environment(fixture_home_doc), SensorSpec())
    hub = EdgeHub(HubConfig(nominal_rates={1: 7000}))
    srv = hubserver.HubServer(
        hub,
        http_port=0,
        udp_port=0,
        recommend=hubserver.RecommendService(engine),
    )
    srv.start()
    yield srv
    srv.stop()


def get(srv, path):
    with urllib.request.urlopen(f"http://127.0.0.1:{srv.http_port}{path}") as r:
        return json.loads(r.read())


def post(srv, path, body):
    req = urllib.request.Request(
        f"http://127.0.0.1:{srv.http_port}{path}",
        data=json.dumps(body).encode(),
        headers={"Content-Type": "application/json"},
    )
    with urllib.request.urlopen(req) as r:
        return json.loads(r.read())


def stream_device(srv, duration_s=5.0, device_id=1):
    script = ActivityScript((ScriptEntry(1.0, 2.0, ActivityKind.FOOTSTEP),))
    run = ds.run_device(
        device_id, script, ClockModel(7000.0), NoiseModel(0.002), None, duration_s, seed=1
    )
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    for pkt in run.packets:
        sock.sendto(pkt, ("127.0.0.1", srv.udp_port))
    srv.drain()
    time.sleep(0.05)
    return run


class TestHttp:
    def test_health_empty(self, server):
        health = get(server, "/health")
        assert health["devices"] == []
        assert health["disk_bytes_free"] > 0
        assert health["uptime_s"] >= 0

    def test_udp_ingest_then_health_and_segments(self, server):
        run = stream_device(server)
        health = get(server, "/health")
        dev = health["devices"][0]
        assert dev["device_id"] == 1
        assert dev["received"] == len(run.packets)
        assert dev["lost"] == 0
        devices = get(server, "/devices")
        assert devices[0]["device_id"] == 1
        segs = get(server, "/segments/1")
        assert segs[0]["stored_samples"] == len(run.samples)
        assert segs[0]["nominal_rate_hz"] == 7000

    def test_unknown_device_segments_404(self, server):
        with pytest.raises(urllib.error.HTTPError) as err:
            get(server, "/segments/99")
        assert err.value.code == 404

    def test_recommend_session_flow(self, server):
        created = post(server, "/recommend/session", {})
        sid = created["session_id"]
        assert created["output"]["kind"] == "question"
        out = None
        for answer in ["1", "yes", "medication_shake", "yes"]:
            out = post(server, f"/recommend/session/{sid}/message", {"message": answer})
        assert out["phase"] == "present"
        cards = out["output"]["recommendations"]
        assert cards
        totals = [c["total"] for c in cards]
        assert totals == sorted(totals, reverse=True)
        for c in cards:
            assert c["total"] == pytest.approx((c["perf_score"] + c["ux_score"]) / 2)
        view = get(server, f"/recommend/session/{sid}")
        assert view["phase"] == "present"
        assert view["cards"]
        assert view["graph"]["rooms"] == ["kitchen", "living"]
        assert any(t["role"] == "user" for t in view["transcript"])

    def test_unknown_session_404(self, server):
        with pytest.raises(urllib.error.HTTPError) as err:
            post(server, "/recommend/session/deadbeef/message", {"message": "hi"})
        assert err.value.code == 404

    def test_bad_json_400(self, server):
        req = urllib.request.Request(
            f"http://127.0.0.1:{server.http_port}/recommend/session",
            data=b"{not json",
            headers={"Content-Type": "application/json"},
        )
        with pytest.raises(urllib.error.HTTPError) as err:
            urllib.request.urlopen(req)
        assert err.value.code == 400

    def test_missing_message_400(self, server):
        created = post(server, "/recommend/session", {})
        with pytest.raises(urllib.error.HTTPError) as err:
            post(server, f"/recommend/session/{created['session_id']}/message", {})
        assert err.value.code == 400

    def test_unknown_route_404(self, server):
        with pytest.raises(urllib.error.HTTPError) as err:
            get(server, "/nope")
        assert err.value.code == 404


def test_recommend_unconfigured_503():
    srv = hubserver.HubServer(EdgeHub(), http_port=0, udp_port=None)
    srv.start()
    try:
        with pytest.raises(urllib.error.HTTPError) as err:
            post(srv, "/recommend/session", {})
        assert err.value.code == 503
    finally:
        srv.stop()


def test_static_ui_serving(tmp_path):
    (tmp_path / "index.html").write_text("<html><body>ui</body></html>")
    (tmp_path / "app.js").write_text("console.log('x')")
    srv = hubserver.HubServer(EdgeHub(), http_port=0, udp_port=None, ui_dir=tmp_path)
    srv.start()
    try:
        with urllib.request.urlopen(f"http://127.0.0.1:{srv.http_port}/") as r:
            assert b"ui" in r.read()
            assert "text/html" in r.headers["Content-Type"]
        with urllib.request.urlopen(f"http://127.0.0.1:{srv.http_port}/app.js") as r:
            assert b"console" in r.read()
        with pytest.raises(urllib.error.HTTPError):
            urllib.request.urlopen(f"http://127.0.0.1:{srv.http_port}/../etc/passwd")
    finally:
        srv.stop()


class _PushSink(BaseHTTPRequestHandler):
    received = []

    def do_POST(self):
        length = int(self.headers["Content-Length"])
        _PushSink.received.append(json.loads(self.rfile.read(length)))
        self.send_response(204)
        self.end_headers()

    def log_message(self, fmt, *args):
        pass


def test_status_push_posts_health_reports():
    sink = HTTPServer(("127.0.0.1", 0), _PushSink)
    threading.Thread(target=sink.serve_forever, daemon=True).start()
    _PushSink.received = []
    url = f"http://127.0.0.1:{sink.server_address[1]}/status"
    srv = hubserver.HubServer(
        EdgeHub(), http_port=0, udp_port=None,
        status_push_url=url, status_push_period_s=0.1,
    )
    srv.start()
    try:
        deadline = time.monotonic() + 5.0
        while len(_PushSink.received) < 2 and time.monotonic() < deadline:
            time.sleep(0.05)
        assert len(_PushSink.received) >= 2
        assert "devices" in _PushSink.received[0]
        assert "disk_bytes_free" in _PushSink.received[0]
    finally:
        srv.stop()
        sink.shutdown()
