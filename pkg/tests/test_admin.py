import http.client
import json
import socket
import time
import urllib.error
import urllib.request

import pytest

from gpnode.admin import AdminServer, host_info
from gpnode.service import GPNode
from gpnode.wire import encode_sample


def free_udp_port():
    s = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    return port


def request(srv, method, path, body=None):
    data = json.dumps(body).encode() if body is not None else None
    headers = {"Content-Type": "application/json"} if data else {}
    req = urllib.request.Request(srv.url + path, data=data, method=method,
                                 headers=headers)
    try:
        with urllib.request.urlopen(req, timeout=5) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as exc:
        return exc.code, json.loads(exc.read())


@pytest.fixture
def server():
    node = GPNode()
    srv = AdminServer(node, port=0)
    srv.start()
    yield srv
    srv.stop()
    node.shutdown()


class TestSlotRoutes:
    def test_list_slots(self, server):
        status, docs = request(server, "GET", "/api/slots")
        assert status == 200
        assert [d["id"] for d in docs] == [0, 1, 2, 3]
        assert docs[0]["endpoint"]["read_port"] == 8000
        assert docs[0]["metrics"]["received_quantity"] == 0
        assert docs[0]["preset"] == "Toy"

    def test_single_slot_and_metrics(self, server):
        status, doc = request(server, "GET", "/api/slots/2")
        assert status == 200
        assert doc["id"] == 2
        status, metrics = request(server, "GET", "/api/slots/2/metrics")
        assert status == 200
        assert metrics["stored_quantity"] == 0
        assert metrics["mean_compute_time"] == 0.0

    def test_unknown_slot_404(self, server):
        status, doc = request(server, "GET", "/api/slots/42")
        assert status == 404
        assert doc["error"]["code"] == "not-found"

    def test_unknown_route_404(self, server):
        status, doc = request(server, "GET", "/api/nothing")
        assert status == 404
        status, doc = request(server, "POST", "/api/slots/0/explode", body={})
        assert status == 404

    def test_method_not_allowed(self, server):
        status, doc = request(server, "DELETE", "/api/slots/0")
        assert status == 405


class TestEndpointAndConfig:
    def test_put_endpoint_partial(self, server):
        status, doc = request(server, "PUT", "/api/slots/0/endpoint",
                              body={"read_port": 9111, "listen_rate_hz": 400})
        assert status == 200
        assert doc["endpoint"]["read_port"] == 9111
        assert doc["endpoint"]["send_port"] == 8050
        assert doc["endpoint"]["listen_rate_hz"] == 400.0

    def test_put_endpoint_invalid(self, server):
        status, doc = request(server, "PUT", "/api/slots/0/endpoint",
                              body={"read_port": "nine"})
        assert status == 400
        assert doc["error"]["code"] == "invalid-config"

    def test_put_config(self, server):
        model = {"d_in": 3, "d_out": 2, "sigma_f": 1.0,
                 "length_scales": [0.5, 0.5, 0.5], "sigma_n": 0.2,
                 "max_leaves": 4, "max_local_data": 16}
        status, doc = request(server, "PUT", "/api/slots/1/config", body=model)
        assert status == 200
        assert doc["model"]["d_in"] == 3
        assert doc["model"]["rng_seed"] == 1  # node seed + slot id
        assert doc["preset"] is None

    def test_put_config_locked_while_gp_active(self, server):
        request(server, "POST", "/api/slots/0/gp", body={"active": True})
        model = {"d_in": 1, "d_out": 1, "sigma_f": 1.0,
                 "length_scales": [0.5], "sigma_n": 0.2,
                 "max_leaves": 4, "max_local_data": 16}
        status, doc = request(server, "PUT", "/api/slots/0/config", body=model)
        assert status == 409
        assert doc["error"]["code"] == "locked-state"

    def test_malformed_body(self, server):
        req = urllib.request.Request(
            server.url + "/api/slots/0/endpoint", data=b"{oops",
            method="PUT", headers={"Content-Type": "application/json"})
        with pytest.raises(urllib.error.HTTPError) as exc:
            urllib.request.urlopen(req, timeout=5)
        assert exc.value.code == 400


class TestPresets:
    def test_list_presets(self, server):
        status, docs = request(server, "GET", "/api/presets")
        assert status == 200
        assert [d["name"] for d in docs] == [
            "SARCOS", "KIN40K", "POL", "PUMADYN32NM", "Control", "Toy",
        ]
        toy = docs[-1]
        assert toy["d_in"] == 1
        assert toy["note"]

    def test_apply_preset(self, server):
        status, doc = request(server, "POST", "/api/slots/3/preset",
                              body={"name": "KIN40K"})
        assert status == 200
        assert doc["preset"] == "KIN40K"
        assert doc["model"]["d_in"] == 8

    def test_apply_unknown_preset(self, server):
        status, doc = request(server, "POST", "/api/slots/3/preset",
                              body={"name": "Mystery"})
        assert status == 404
        assert doc["error"]["code"] == "not-found"

    def test_apply_preset_bad_body(self, server):
        status, doc = request(server, "POST", "/api/slots/3/preset",
                              body={"title": "Toy"})
        assert status == 400


class TestLifecycleOverHttp:
    def test_switches_and_run(self, server):
        read_port = free_udp_port()
        listen = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        listen.bind(("127.0.0.1", 0))
        listen.settimeout(2.0)
        try:
            status, doc = request(server, "PUT", "/api/slots/0/endpoint", body={
                "read_port": read_port,
                "send_port": listen.getsockname()[1],
            })
            assert status == 200

            status, doc = request(server, "POST", "/api/slots/0/start", body={})
            assert status == 409
            assert doc["error"]["code"] == "not-active"

            status, doc = request(server, "POST", "/api/slots/0/udp",
                                  body={"active": True})
            assert doc["udp_active"] is True
            status, doc = request(server, "POST", "/api/slots/0/gp",
                                  body={"active": True})
            assert doc["gp_active"] is True
            status, doc = request(server, "POST", "/api/slots/0/start", body={})
            assert status == 200
            assert doc["running"] is True

            sender = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
            sender.sendto(encode_sample([0.5], [1.0], 3.25),
                          ("127.0.0.1", read_port))
            reply, _ = listen.recvfrom(65535)
            assert len(reply) == 16
            sender.close()

            deadline = time.monotonic() + 3
            while time.monotonic() < deadline:
                _, metrics = request(server, "GET", "/api/slots/0/metrics")
                if metrics["received_quantity"] == 1:
                    break
            assert metrics["received_quantity"] == 1
            assert metrics["stored_quantity"] == 1

            status, doc = request(server, "POST", "/api/slots/0/stop", body={})
            assert doc["running"] is False
        finally:
            listen.close()

    def test_gp_switch_off_while_running_stops(self, server):
        read_port = free_udp_port()
        request(server, "PUT", "/api/slots/1/endpoint",
                body={"read_port": read_port, "send_port": free_udp_port()})
        request(server, "POST", "/api/slots/1/udp", body={"active": True})
        request(server, "POST", "/api/slots/1/gp", body={"active": True})
        request(server, "POST", "/api/slots/1/start", body={})
        status, doc = request(server, "POST", "/api/slots/1/gp",
                              body={"active": False})
        assert status == 200
        assert doc["running"] is False
        assert doc["gp_active"] is False

    def test_port_occupied_maps_to_409(self, server):
        blocker = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        blocker.bind(("127.0.0.1", 0))
        try:
            request(server, "PUT", "/api/slots/2/endpoint",
                    body={"read_port": blocker.getsockname()[1],
                          "send_port": free_udp_port()})
            request(server, "POST", "/api/slots/2/udp", body={"active": True})
            request(server, "POST", "/api/slots/2/gp", body={"active": True})
            status, doc = request(server, "POST", "/api/slots/2/start", body={})
            assert status == 409
            assert doc["error"]["code"] == "port-occupied"
        finally:
            blocker.close()

    def test_switch_body_validation(self, server):
        status, doc = request(server, "POST", "/api/slots/0/udp",
                              body={"active": "yes"})
        assert status == 400
        assert doc["error"]["code"] == "invalid-config"


class TestEventsStream:
    def test_five_hz_snapshots(self, server):
        conn = http.client.HTTPConnection("127.0.0.1", server.bound_port, timeout=5)
        try:
            conn.request("GET", "/api/slots/0/events")
            resp = conn.getresponse()
            assert resp.status == 200
            assert resp.headers["Content-Type"].startswith("text/event-stream")
            events = []
            started = time.monotonic()
            while len(events) < 3 and time.monotonic() - started < 3.0:
                line = resp.fp.readline().decode()
                if line.startswith("data: "):
                    events.append(json.loads(line[len("data: "):]))
            elapsed = time.monotonic() - started
            assert len(events) == 3
            assert elapsed >= 0.3  # 5 Hz pacing, not a burst
            assert elapsed < 2.5
            for ev in events:
                assert ev["slot"]["id"] == 0
                assert "received_quantity" in ev["metrics"]
        finally:
            conn.close()

    def test_server_survives_client_disconnect(self, server):
        conn = http.client.HTTPConnection("127.0.0.1", server.bound_port, timeout=5)
        conn.request("GET", "/api/slots/0/events")
        resp = conn.getresponse()
        resp.fp.readline()
        conn.close()  # drop mid-stream
        time.sleep(0.3)
        status, _ = request(server, "GET", "/api/slots")
        assert status == 200


class TestStaticAndHostinfo:
    def test_hostinfo(self, server):
        status, doc = request(server, "GET", "/api/hostinfo")
        assert status == 200
        assert doc["hostname"]
        assert "127.0.0.1" in doc["addresses"]

    def test_placeholder_without_console(self, server):
        with urllib.request.urlopen(server.url + "/", timeout=5) as resp:
            assert resp.status == 200
            assert b"gpnode" in resp.read()

    def test_static_serving(self, tmp_path):
        (tmp_path / "index.html").write_text("<html>console</html>")
        sub = tmp_path / "sub"
        sub.mkdir()
        (sub / "app.js").write_text("export {};")
        node = GPNode()
        srv = AdminServer(node, port=0, static_dir=str(tmp_path))
        srv.start()
        try:
            with urllib.request.urlopen(srv.url + "/", timeout=5) as resp:
                assert b"console" in resp.read()
            with urllib.request.urlopen(srv.url + "/sub/app.js", timeout=5) as resp:
                assert b"export" in resp.read()
                assert "javascript" in resp.headers["Content-Type"]
            conn = http.client.HTTPConnection("127.0.0.1", srv.bound_port, timeout=5)
            conn.request("GET", "/../secret.txt")
            resp = conn.getresponse()
            assert resp.status == 404
            conn.close()
        finally:
            srv.stop()
            node.shutdown()
