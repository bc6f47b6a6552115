"""Admin HTTP API and static console hosting.

Loopback-oriented JSON API over the slot registry: inspect slots, edit
endpoints and model configs, flip switches, start and stop pipelines,
apply presets, and stream metrics snapshots for live gauges. Errors
carry a machine-readable ``code`` and map onto HTTP statuses.
"""

from __future__ import annotations

import json
import logging
import mimetypes
import socket
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional

from .service import (
    GPNode,
    InvalidConfigError,
    PortOccupiedError,
    ServiceError,
    parse_model_config,
)
from .presets import available_presets, load_preset

log = logging.getLogger("gpnode.admin")

EVENT_STREAM_HZ = 5.0
_MAX_BODY = 1 << 20

_STATUS_BY_CODE = {
    "locked-state": 409,
    "port-occupied": 409,
    "not-found": 404,
    "invalid-config": 400,
    "not-active": 409,
}

_PLACEHOLDER_PAGE = """<!doctype html>
<html><head><meta charset="utf-8"><title>gpnode</title></head>
<body><h1>gpnode admin API</h1>
<p>The API lives under <code>/api/</code>. No console build is installed;
point the server at one with <code>--console-dir</code> or the
<code>GPNODE_CONSOLE_DIR</code> environment variable.</p>
</body></html>
"""


def host_info() -> dict:
    """Hostname and local IPv4 addresses for endpoint autofill."""
    hostname = socket.gethostname()
    addresses = {"127.0.0.1"}
    try:
        for info in socket.getaddrinfo(hostname, None, socket.AF_INET):
            addresses.add(info[4][0])
    except socket.gaierror:
        pass
    # the address used for an outbound route, without sending anything
    probe = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    try:
        probe.connect(("203.0.113.1", 9))
        addresses.add(probe.getsockname()[0])
    except OSError:
        pass
    finally:
        probe.close()
    return {"hostname": hostname, "addresses": sorted(addresses)}


class _AdminHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "gpnode-admin"

    # set by AdminServer on the handler subclass
    node: GPNode = None
    static_dir: Optional[Path] = None
    stopping: threading.Event = None

    def log_message(self, format, *args):  # noqa: A002 - stdlib signature
        log.debug("%s %s", self.address_string(), format % args)

    # ------------------------------------------------------------------
    # plumbing

    def _send_json(self, status: int, payload) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_error(self, status: int, code: str, message: str) -> None:
        self._send_json(status, {"error": {"code": code, "message": message}})

    def _fail(self, exc: ServiceError) -> None:
        status = _STATUS_BY_CODE.get(exc.code, 500)
        self._send_error(status, exc.code, str(exc))

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        if length > _MAX_BODY:
            raise InvalidConfigError("request body too large")
        raw = self.rfile.read(length) if length else b""
        if not raw:
            raise InvalidConfigError("request body must be a JSON object")
        try:
            doc = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise InvalidConfigError(f"request body is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise InvalidConfigError("request body must be a JSON object")
        return doc

    def _slot_tail(self, parts) -> tuple:
        """('api','slots','3','metrics') -> (slot, 'metrics')."""
        try:
            slot_id = int(parts[2])
        except ValueError:
            raise InvalidConfigError(f"slot id {parts[2]!r} is not an integer")
        slot = self.node.get_slot(slot_id)
        tail = parts[3] if len(parts) > 3 else ""
        return slot, tail

    def _slot_doc(self, slot) -> dict:
        doc = slot.describe()
        doc["metrics"] = slot.metrics_snapshot().to_dict()
        return doc

    # ------------------------------------------------------------------
    # routing

    def do_GET(self):
        try:
            parts = [p for p in self.path.split("?")[0].split("/") if p]
            if parts[:1] != ["api"]:
                return self._serve_static(parts)
            if parts == ["api", "slots"]:
                return self._send_json(200, [self._slot_doc(s) for s in self.node.slots()])
            if parts == ["api", "presets"]:
                docs = [load_preset(name).to_dict() for name in available_presets()]
                return self._send_json(200, docs)
            if parts == ["api", "hostinfo"]:
                return self._send_json(200, host_info())
            if len(parts) >= 3 and parts[1] == "slots":
                slot, tail = self._slot_tail(parts)
                if tail == "metrics":
                    return self._send_json(200, slot.metrics_snapshot().to_dict())
                if tail == "events":
                    return self._stream_events(slot)
                if tail == "":
                    return self._send_json(200, self._slot_doc(slot))
            self._send_error(404, "not-found", f"no route for GET {self.path}")
        except ServiceError as exc:
            self._fail(exc)

    def do_PUT(self):
        try:
            parts = [p for p in self.path.split("?")[0].split("/") if p]
            if len(parts) == 4 and parts[:2] == ["api", "slots"]:
                slot, tail = self._slot_tail(parts)
                if tail == "endpoint":
                    slot.set_endpoint(slot.endpoint.merged(self._read_body()))
                    return self._send_json(200, self._slot_doc(slot))
                if tail == "config":
                    cfg = parse_model_config(self._read_body(),
                                             default_seed=self.node.seed + slot.id)
                    slot.configure(cfg)
                    return self._send_json(200, self._slot_doc(slot))
            self._send_error(404, "not-found", f"no route for PUT {self.path}")
        except ServiceError as exc:
            self._fail(exc)

    def do_POST(self):
        try:
            parts = [p for p in self.path.split("?")[0].split("/") if p]
            if len(parts) == 4 and parts[:2] == ["api", "slots"]:
                slot, tail = self._slot_tail(parts)
                if tail in ("udp", "gp"):
                    doc = self._read_body()
                    if not isinstance(doc.get("active"), bool):
                        raise InvalidConfigError("body must be {\"active\": true|false}")
                    action = {
                        ("udp", True): slot.activate_udp,
                        ("udp", False): slot.deactivate_udp,
                        ("gp", True): slot.activate_gp,
                        ("gp", False): slot.deactivate_gp,
                    }[(tail, doc["active"])]
                    action()
                    return self._send_json(200, self._slot_doc(slot))
                if tail == "start":
                    slot.start()
                    return self._send_json(200, self._slot_doc(slot))
                if tail == "stop":
                    slot.stop()
                    return self._send_json(200, self._slot_doc(slot))
                if tail == "preset":
                    doc = self._read_body()
                    name = doc.get("name")
                    if not isinstance(name, str):
                        raise InvalidConfigError("body must be {\"name\": \"...\"}")
                    self.node.apply_preset(slot.id, name)
                    return self._send_json(200, self._slot_doc(slot))
            self._send_error(404, "not-found", f"no route for POST {self.path}")
        except ServiceError as exc:
            self._fail(exc)

    def do_DELETE(self):
        self._send_error(405, "method-not-allowed", "unsupported method")

    # ------------------------------------------------------------------
    # event stream

    def _stream_events(self, slot) -> None:
        self.send_response(200)
        self.send_header("Content-Type", "text/event-stream")
        self.send_header("Cache-Control", "no-cache")
        self.send_header("Connection", "close")
        self.end_headers()
        period = 1.0 / EVENT_STREAM_HZ
        try:
            while not self.stopping.is_set():
                payload = {
                    "time": time.time(),
                    "slot": slot.describe(),
                    "metrics": slot.metrics_snapshot().to_dict(),
                }
                data = json.dumps(payload)
                self.wfile.write(f"data: {data}\n\n".encode("utf-8"))
                self.wfile.flush()
                time.sleep(period)
        except (BrokenPipeError, ConnectionResetError):
            pass  # client went away; nothing to clean up

    # ------------------------------------------------------------------
    # static console files

    def _serve_static(self, parts) -> None:
        if self.static_dir is None:
            if not parts:  # site root
                body = _PLACEHOLDER_PAGE.encode("utf-8")
                self.send_response(200)
                self.send_header("Content-Type", "text/html; charset=utf-8")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)
                return
            return self._send_error(404, "not-found", f"no file {self.path!r}")
        root = self.static_dir.resolve()
        relative = "/".join(parts) if parts else "index.html"
        target = (root / relative).resolve()
        if target.is_dir():
            target = target / "index.html"
        if root not in target.parents and target != root:
            return self._send_error(404, "not-found", "path outside console root")
        if not target.is_file():
            return self._send_error(404, "not-found", f"no file {self.path!r}")
        ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        body = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


class AdminServer:
    """Threaded HTTP server bound to the node's admin address."""

    def __init__(self, node: GPNode, host: Optional[str] = None,
                 port: Optional[int] = None, static_dir: Optional[str] = None):
        self.node = node
        self.host = host if host is not None else node.admin_ip
        self.port = port if port is not None else node.admin_port
        self._static_dir = Path(static_dir) if static_dir else None
        self._stopping = threading.Event()
        self._server: Optional[ThreadingHTTPServer] = None
        self._thread: Optional[threading.Thread] = None

    @property
    def bound_port(self) -> int:
        if self._server is None:
            return self.port
        return self._server.server_address[1]

    @property
    def url(self) -> str:
        return f"http://{self.host}:{self.bound_port}"

    def start(self) -> None:
        if self._server is not None:
            return
        handler = type("BoundAdminHandler", (_AdminHandler,), {
            "node": self.node,
            "static_dir": self._static_dir,
            "stopping": self._stopping,
        })
        try:
            server = ThreadingHTTPServer((self.host, self.port), handler)
        except OSError as exc:
            raise PortOccupiedError(
                f"cannot bind admin API to {self.host}:{self.port} ({exc})"
            ) from exc
        server.daemon_threads = True
        self._stopping.clear()
        self._server = server
        self._thread = threading.Thread(
            target=server.serve_forever, name="gpnode-admin", daemon=True
        )
        self._thread.start()
        log.info("admin API on %s", self.url)

    def stop(self) -> None:
        if self._server is None:
            return
        self._stopping.set()
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5.0)
        self._server = None
        self._thread = None
        log.info("admin API stopped")
