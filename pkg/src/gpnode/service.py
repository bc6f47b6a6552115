"""The runnable node: UDP endpoints, slot lifecycle, metrics, pipeline.

Each model slot owns one receive socket, one send socket, and one tree.
A slot's datagrams are handled strictly in arrival order by a single
pipeline (receive, decode, learn, predict, reply); admin mutations are
serialized with that pipeline through the slot lock and take effect
between datagrams. Distinct slots run in parallel.
"""

from __future__ import annotations

import ipaddress
import json
import logging
import math
import socket
import threading
import time
from collections import deque
from dataclasses import asdict, dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .presets import Preset, PresetNotFoundError, available_presets, load_preset
from .tree import LocalGPTree, TreeConfig
from .gp import FactorizationError, Hyperparameters
from .wire import Command, Malformed, Sample, decode_datagram, encode_reply

log = logging.getLogger("gpnode.service")

DEFAULT_READ_PORT = 8000
DEFAULT_SEND_PORT = 8050
DEFAULT_LISTEN_RATE_HZ = 1000.0
DEFAULT_SLOT_COUNT = 4
ROLLING_WINDOW = 100

_RECV_BUFFER = 65535  # largest possible UDP payload


class ServiceError(Exception):
    """Base for slot and node errors; ``code`` is machine-readable."""

    code = "error"


class LockedStateError(ServiceError):
    code = "locked-state"


class PortOccupiedError(ServiceError):
    code = "port-occupied"


class NotFoundError(ServiceError):
    code = "not-found"


class InvalidConfigError(ServiceError):
    code = "invalid-config"


class NotActiveError(ServiceError):
    code = "not-active"


@dataclass(frozen=True)
class EndpointConfig:
    """Where a slot listens and where its replies go."""

    read_ip: str = "127.0.0.1"
    read_port: int = DEFAULT_READ_PORT
    send_ip: str = "127.0.0.1"
    send_port: int = DEFAULT_SEND_PORT
    listen_rate_hz: float = DEFAULT_LISTEN_RATE_HZ

    def __post_init__(self):
        for label, ip in (("read_ip", self.read_ip), ("send_ip", self.send_ip)):
            try:
                parsed = ipaddress.ip_address(ip)
            except ValueError as exc:
                raise InvalidConfigError(f"{label} {ip!r} is not an IP address") from exc
            if parsed.version != 4:
                raise InvalidConfigError(f"{label} must be IPv4, got {ip!r}")
        for label, port in (("read_port", self.read_port), ("send_port", self.send_port)):
            if not isinstance(port, int) or isinstance(port, bool) or not 1 <= port <= 65535:
                raise InvalidConfigError(f"{label} must be an integer in 1..65535")
        rate = self.listen_rate_hz
        if not isinstance(rate, (int, float)) or isinstance(rate, bool):
            raise InvalidConfigError("listen_rate_hz must be a positive real")
        if not math.isfinite(rate) or rate <= 0:
            raise InvalidConfigError("listen_rate_hz must be a positive real")
        object.__setattr__(self, "listen_rate_hz", float(rate))

    def merged(self, doc: dict) -> "EndpointConfig":
        """New config with fields from ``doc`` replacing current values."""
        known = {"read_ip", "read_port", "send_ip", "send_port", "listen_rate_hz"}
        unknown = set(doc) - known
        if unknown:
            raise InvalidConfigError(f"unknown endpoint fields: {sorted(unknown)}")
        return replace(self, **doc)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Metrics:
    """Point-in-time counters and timers for one slot."""

    received_quantity: int = 0
    stored_quantity: int = 0
    malformed_quantity: int = 0
    send_error_quantity: int = 0
    compute_error_quantity: int = 0
    last_read_time: float = 0.0
    last_compute_time: float = 0.0
    last_send_time: float = 0.0
    mean_read_time: float = 0.0
    mean_compute_time: float = 0.0
    mean_send_time: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


class _Timer:
    """Last value plus rolling mean over the most recent samples."""

    def __init__(self, window: int = ROLLING_WINDOW):
        self.last = 0.0
        self._values = deque(maxlen=window)

    def record(self, seconds: float) -> None:
        self.last = seconds
        self._values.append(seconds)

    @property
    def mean(self) -> float:
        if not self._values:
            return 0.0
        return sum(self._values) / len(self._values)

    def reset(self) -> None:
        self.last = 0.0
        self._values.clear()


def parse_model_config(doc: dict, default_seed: int = 0) -> TreeConfig:
    """Build a TreeConfig from a JSON-shaped mapping.

    Schema: d_in, d_out, sigma_f, length_scales, sigma_n, max_leaves,
    max_local_data, optional rng_seed. Raises InvalidConfigError.
    """
    if not isinstance(doc, dict):
        raise InvalidConfigError("model config must be an object")
    known = {"d_in", "d_out", "sigma_f", "length_scales", "sigma_n",
             "max_leaves", "max_local_data", "rng_seed"}
    unknown = set(doc) - known
    if unknown:
        raise InvalidConfigError(f"unknown model fields: {sorted(unknown)}")
    missing = known - {"rng_seed"} - set(doc)
    if missing:
        raise InvalidConfigError(f"missing model fields: {sorted(missing)}")
    seed = doc.get("rng_seed", default_seed)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise InvalidConfigError("rng_seed must be a non-negative integer")
    for key in ("d_in", "d_out", "max_leaves", "max_local_data"):
        if not isinstance(doc[key], int) or isinstance(doc[key], bool):
            raise InvalidConfigError(f"model field {key!r} must be an integer")
    scales = doc["length_scales"]
    if not isinstance(scales, (list, tuple)) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in scales
    ):
        raise InvalidConfigError("length_scales must be a list of reals")
    for key in ("sigma_f", "sigma_n"):
        if not isinstance(doc[key], (int, float)) or isinstance(doc[key], bool):
            raise InvalidConfigError(f"model field {key!r} must be a real")
    try:
        hp = Hyperparameters(
            sigma_f=float(doc["sigma_f"]),
            length_scales=np.asarray(scales, dtype=np.float64),
            sigma_n=float(doc["sigma_n"]),
            d_in=doc["d_in"],
            d_out=doc["d_out"],
        )
        return TreeConfig(
            max_leaves=doc["max_leaves"],
            max_local_data=doc["max_local_data"],
            hp=hp,
            rng_seed=seed,
        )
    except ValueError as exc:
        raise InvalidConfigError(str(exc)) from exc


def model_config_to_dict(cfg: TreeConfig) -> dict:
    return {
        "d_in": cfg.hp.d_in,
        "d_out": cfg.hp.d_out,
        "sigma_f": cfg.hp.sigma_f,
        "length_scales": [float(v) for v in cfg.hp.length_scales],
        "sigma_n": cfg.hp.sigma_n,
        "max_leaves": cfg.max_leaves,
        "max_local_data": cfg.max_local_data,
        "rng_seed": cfg.rng_seed,
    }


class ModelSlot:
    """One independently runnable model with its own UDP endpoints."""

    def __init__(self, slot_id: int, endpoint: EndpointConfig,
                 tree_config: Optional[TreeConfig] = None,
                 preset_name: Optional[str] = None):
        self.id = slot_id
        self._lock = threading.RLock()
        self._endpoint = endpoint
        self._tree_config = tree_config
        self._preset_name = preset_name
        self._udp_active = False
        self._gp_active = False
        self._running = False
        self._tree: Optional[LocalGPTree] = None
        self._read_sock: Optional[socket.socket] = None
        self._send_sock: Optional[socket.socket] = None
        self._thread: Optional[threading.Thread] = None
        self._stop_event = threading.Event()
        self._received = 0
        self._malformed = 0
        self._send_errors = 0
        self._compute_errors = 0
        self._read_timer = _Timer()
        self._compute_timer = _Timer()
        self._send_timer = _Timer()

    # ------------------------------------------------------------------
    # state inspection

    @property
    def endpoint(self) -> EndpointConfig:
        with self._lock:
            return self._endpoint

    @property
    def tree_config(self) -> Optional[TreeConfig]:
        with self._lock:
            return self._tree_config

    @property
    def tree(self) -> Optional[LocalGPTree]:
        return self._tree

    @property
    def udp_active(self) -> bool:
        return self._udp_active

    @property
    def gp_active(self) -> bool:
        return self._gp_active

    @property
    def running(self) -> bool:
        return self._running

    @property
    def preset_name(self) -> Optional[str]:
        return self._preset_name

    def metrics_snapshot(self) -> Metrics:
        with self._lock:
            stored = self._tree.stats().stored_points if self._tree is not None else 0
            return Metrics(
                received_quantity=self._received,
                stored_quantity=stored,
                malformed_quantity=self._malformed,
                send_error_quantity=self._send_errors,
                compute_error_quantity=self._compute_errors,
                last_read_time=self._read_timer.last,
                last_compute_time=self._compute_timer.last,
                last_send_time=self._send_timer.last,
                mean_read_time=self._read_timer.mean,
                mean_compute_time=self._compute_timer.mean,
                mean_send_time=self._send_timer.mean,
            )

    def describe(self) -> dict:
        with self._lock:
            model = (model_config_to_dict(self._tree_config)
                     if self._tree_config is not None else None)
            return {
                "id": self.id,
                "endpoint": self._endpoint.to_dict(),
                "udp_active": self._udp_active,
                "gp_active": self._gp_active,
                "running": self._running,
                "preset": self._preset_name,
                "model": model,
            }

    # ------------------------------------------------------------------
    # configuration

    def set_endpoint(self, endpoint: EndpointConfig) -> None:
        with self._lock:
            if self._running:
                raise LockedStateError(
                    f"slot {self.id} is running; stop it before changing endpoints"
                )
            self._endpoint = endpoint

    def configure(self, tree_config: TreeConfig,
                  preset_name: Optional[str] = None) -> None:
        with self._lock:
            if self._gp_active:
                raise LockedStateError(
                    f"slot {self.id} has an active model; deactivate it before editing"
                )
            self._tree_config = tree_config
            self._preset_name = preset_name

    def apply_preset(self, preset: Preset, rng_seed: Optional[int] = None) -> None:
        with self._lock:
            if rng_seed is None:
                rng_seed = (self._tree_config.rng_seed
                            if self._tree_config is not None else 0)
            self.configure(preset.tree_config(rng_seed), preset_name=preset.name)

    # ------------------------------------------------------------------
    # lifecycle

    def activate_udp(self) -> None:
        with self._lock:
            self._udp_active = True

    def deactivate_udp(self) -> None:
        # stop first: joining the pipeline under the lock would deadlock
        self.stop()
        with self._lock:
            self._udp_active = False

    def activate_gp(self) -> None:
        """Create a fresh model; discards any prior one and its counters."""
        with self._lock:
            if self._tree_config is None:
                raise InvalidConfigError(
                    f"slot {self.id} has no model configuration"
                )
            self._tree = LocalGPTree(self._tree_config)
            self._gp_active = True
            self._received = 0
            self._malformed = 0
            self._send_errors = 0
            self._compute_errors = 0
            for timer in (self._read_timer, self._compute_timer, self._send_timer):
                timer.reset()
            log.info("slot %d: model activated (d_in=%d, d_out=%d)", self.id,
                     self._tree_config.hp.d_in, self._tree_config.hp.d_out)

    def deactivate_gp(self) -> None:
        # stop first: joining the pipeline under the lock would deadlock
        self.stop()
        with self._lock:
            self._tree = None
            self._gp_active = False
            log.info("slot %d: model deactivated", self.id)

    def start(self) -> None:
        """Bind the read socket and launch the pipeline thread."""
        with self._lock:
            if self._running:
                return
            if not self._udp_active:
                raise NotActiveError(f"slot {self.id}: UDP switch is off")
            if not self._gp_active:
                raise NotActiveError(f"slot {self.id}: GP switch is off")
            sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
            try:
                # no address reuse: a second bind must fail loudly
                sock.bind((self._endpoint.read_ip, self._endpoint.read_port))
            except OSError as exc:
                sock.close()
                raise PortOccupiedError(
                    f"slot {self.id}: cannot bind "
                    f"{self._endpoint.read_ip}:{self._endpoint.read_port} ({exc})"
                ) from exc
            sock.settimeout(1.0 / self._endpoint.listen_rate_hz)
            self._read_sock = sock
            self._send_sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
            self._stop_event.clear()
            self._thread = threading.Thread(
                target=self._run_loop, name=f"gpnode-slot-{self.id}", daemon=True
            )
            self._running = True
            self._thread.start()
            log.info("slot %d: started on %s:%d -> %s:%d", self.id,
                     self._endpoint.read_ip, self._endpoint.read_port,
                     self._endpoint.send_ip, self._endpoint.send_port)

    def stop(self) -> None:
        """Stop the pipeline; counters persist, only a Command resets data."""
        with self._lock:
            if not self._running:
                return
            self._stop_event.set()
            thread = self._thread
        if thread is not None:
            thread.join(timeout=5.0)
        with self._lock:
            for sock in (self._read_sock, self._send_sock):
                if sock is not None:
                    sock.close()
            self._read_sock = None
            self._send_sock = None
            self._thread = None
            self._running = False
            log.info("slot %d: stopped", self.id)

    # ------------------------------------------------------------------
    # pipeline

    def handle_datagram(self, data: bytes) -> Optional[bytes]:
        """Decode, learn, predict; returns reply bytes for samples only."""
        with self._lock:
            if self._tree is None:
                raise NotActiveError(f"slot {self.id}: GP switch is off")
            hp = self._tree_config.hp
            started = time.perf_counter()
            message = decode_datagram(data, hp.d_in, hp.d_out)
            self._received += 1
            if isinstance(message, Command):
                self._tree.reset()
                log.info("slot %d: command %r, data set reset", self.id, message.value)
                return None
            if isinstance(message, Malformed):
                self._malformed += 1
                log.warning("slot %d: malformed datagram (%d bytes): %s",
                            self.id, message.byte_len, message.reason)
                return None
            x = np.asarray(message.x, dtype=np.float64)
            try:
                self._tree.insert(x, np.asarray(message.y, dtype=np.float64))
                mu = self._tree.predict(x)
                reply = encode_reply(mu, message.t)
            except (ValueError, ArithmeticError, FactorizationError) as exc:
                # extreme magnitudes can defeat the numerics; the loop
                # must outlive any single datagram
                self._compute_errors += 1
                log.warning("slot %d: sample rejected by the model: %s", self.id, exc)
                return None
            self._compute_timer.record(time.perf_counter() - started)
            return reply

    def _run_loop(self) -> None:
        endpoint = self._endpoint
        poll_interval = 1.0 / endpoint.listen_rate_hz
        destination = (endpoint.send_ip, endpoint.send_port)
        sock = self._read_sock
        while not self._stop_event.is_set():
            poll_started = time.perf_counter()
            try:
                data, _ = sock.recvfrom(_RECV_BUFFER)
            except socket.timeout:
                continue
            except OSError:
                break  # socket closed during stop
            read_time = time.perf_counter() - poll_started
            with self._lock:
                if self._tree is None:
                    continue
                self._read_timer.record(read_time)
                reply = self.handle_datagram(data)
                if reply is not None:
                    send_started = time.perf_counter()
                    try:
                        self._send_sock.sendto(reply, destination)
                    except OSError as exc:
                        self._send_errors += 1
                        log.warning("slot %d: send to %s:%d failed: %s", self.id,
                                    destination[0], destination[1], exc)
                    else:
                        self._send_timer.record(time.perf_counter() - send_started)
            log.debug("slot %d: datagram %d bytes, read %.6fs", self.id,
                      len(data), read_time)
            # cap the poll rate: no new poll sooner than one interval
            remaining = poll_interval - (time.perf_counter() - poll_started)
            if remaining > 0:
                time.sleep(remaining)


class GPNode:
    """Registry of model slots plus node-level configuration."""

    def __init__(self, slot_count: int = DEFAULT_SLOT_COUNT,
                 host: str = "127.0.0.1", seed: int = 0,
                 admin_ip: str = "127.0.0.1", admin_port: int = 8080):
        self.admin_ip = admin_ip
        self.admin_port = admin_port
        self.seed = seed
        self.autostart_ids: list = []
        toy = load_preset("Toy")
        self._slots = {}
        for i in range(slot_count):
            endpoint = EndpointConfig(
                read_ip=host, read_port=DEFAULT_READ_PORT + i,
                send_ip=host, send_port=DEFAULT_SEND_PORT + i,
            )
            self._slots[i] = ModelSlot(
                i, endpoint, toy.tree_config(rng_seed=seed + i), preset_name="Toy"
            )

    def get_slot(self, slot_id: int) -> ModelSlot:
        slot = self._slots.get(slot_id)
        if slot is None:
            raise NotFoundError(f"no slot {slot_id}; slots: {sorted(self._slots)}")
        return slot

    def slots(self) -> list:
        return [self._slots[i] for i in sorted(self._slots)]

    def describe(self) -> list:
        return [slot.describe() for slot in self.slots()]

    def apply_preset(self, slot_id: int, name: str) -> Preset:
        slot = self.get_slot(slot_id)
        try:
            preset = load_preset(name)
        except PresetNotFoundError as exc:
            raise NotFoundError(str(exc)) from exc
        slot.apply_preset(preset)
        return preset

    def shutdown(self) -> None:
        for slot in self.slots():
            slot.stop()


def load_config_file(path: str) -> dict:
    """Read and structurally validate a node configuration document."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except OSError as exc:
        raise InvalidConfigError(f"cannot read config file {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidConfigError(f"config file {path!r} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise InvalidConfigError("config document must be an object")
    known = {"admin_ip", "admin_port", "seed", "slot_count", "slots"}
    unknown = set(doc) - known
    if unknown:
        raise InvalidConfigError(f"unknown config fields: {sorted(unknown)}")
    return doc


def build_node(doc: dict) -> GPNode:
    """Construct a GPNode from a parsed configuration document.

    Slot entries may carry endpoint fields, a preset name or an inline
    model object (not both), and an autostart flag.
    """
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise InvalidConfigError("seed must be a non-negative integer")
    admin_port = doc.get("admin_port", 8080)
    if not isinstance(admin_port, int) or isinstance(admin_port, bool) \
            or not 1 <= admin_port <= 65535:
        raise InvalidConfigError("admin_port must be an integer in 1..65535")
    admin_ip = doc.get("admin_ip", "127.0.0.1")
    if not isinstance(admin_ip, str):
        raise InvalidConfigError("admin_ip must be an IP address string")
    slot_count = doc.get("slot_count", DEFAULT_SLOT_COUNT)
    if not isinstance(slot_count, int) or isinstance(slot_count, bool) \
            or not 1 <= slot_count <= 64:
        raise InvalidConfigError("slot_count must be an integer in 1..64")

    node = GPNode(slot_count=slot_count, seed=seed,
                  admin_ip=admin_ip, admin_port=admin_port)
    entries = doc.get("slots", [])
    if not isinstance(entries, list):
        raise InvalidConfigError("'slots' must be a list")
    for entry in entries:
        if not isinstance(entry, dict):
            raise InvalidConfigError("slot entries must be objects")
        known = {"id", "read_ip", "read_port", "send_ip", "send_port",
                 "listen_rate_hz", "preset", "model", "autostart"}
        unknown = set(entry) - known
        if unknown:
            raise InvalidConfigError(f"unknown slot fields: {sorted(unknown)}")
        slot_id = entry.get("id")
        if not isinstance(slot_id, int) or isinstance(slot_id, bool):
            raise InvalidConfigError("slot entries need an integer 'id'")
        try:
            slot = node.get_slot(slot_id)
        except NotFoundError as exc:
            raise InvalidConfigError(str(exc)) from exc
        endpoint_doc = {k: entry[k] for k in
                        ("read_ip", "read_port", "send_ip", "send_port",
                         "listen_rate_hz") if k in entry}
        if endpoint_doc:
            slot.set_endpoint(slot.endpoint.merged(endpoint_doc))
        if "preset" in entry and "model" in entry:
            raise InvalidConfigError(
                f"slot {slot_id}: give either 'preset' or 'model', not both"
            )
        if "preset" in entry:
            if not isinstance(entry["preset"], str):
                raise InvalidConfigError("'preset' must be a name string")
            try:
                preset = load_preset(entry["preset"])
            except PresetNotFoundError as exc:
                raise InvalidConfigError(str(exc)) from exc
            slot.apply_preset(preset, rng_seed=seed + slot_id)
        if "model" in entry:
            slot.configure(parse_model_config(entry["model"], default_seed=seed + slot_id))
        autostart = entry.get("autostart", False)
        if not isinstance(autostart, bool):
            raise InvalidConfigError("'autostart' must be a boolean")
        if autostart:
            node.autostart_ids.append(slot_id)
    return node
