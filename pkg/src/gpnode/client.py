"""Dataset streamer and evaluation client.

Sends samples over UDP at a fixed rate, collects prediction replies on
a local port, matches them to requests by the echoed timestamp (bit
pattern, so any 64-bit payload works), and reports error and latency.
Timestamps are monotonic-clock seconds, strictly increasing; they are
the only correlation key the protocol offers. Sending and receiving
are independent threads, so slow replies never stall the send schedule.
"""

from __future__ import annotations

import csv
import math
import socket
import struct
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .wire import MalformedReplyError, decode_reply, encode_sample

TOY_SINE = "toy-sine"
TOY_SINE_NOISE_STD = 0.1


class ClientError(Exception):
    """Harness misuse or unusable input."""


class StreamAborted(ClientError):
    """Socket failure mid-stream; carries the partial log."""

    def __init__(self, message: str, log: "ReplyLog"):
        super().__init__(message)
        self.log = log


@dataclass(frozen=True)
class StreamSpec:
    """What to send, where, and how fast."""

    target: Tuple[str, int]
    listen: Tuple[str, int]
    source: str = TOY_SINE
    rate_hz: float = 200.0
    count: int = 1000
    reply_timeout: float = 1.0
    seed: int = 0
    d_in: int = 1
    d_out: int = 1

    def __post_init__(self):
        if not (isinstance(self.rate_hz, (int, float)) and self.rate_hz > 0
                and math.isfinite(self.rate_hz)):
            raise ClientError("rate_hz must be a positive real")
        if not (isinstance(self.count, int) and self.count >= 1):
            raise ClientError("count must be an integer >= 1")
        if not (isinstance(self.reply_timeout, (int, float)) and self.reply_timeout > 0):
            raise ClientError("reply_timeout must be positive")
        if self.d_in < 1 or self.d_out < 1:
            raise ClientError("dimensions must be at least 1")


@dataclass
class SampleRecord:
    """One sent sample and the reply it got, if any."""

    t: float
    x: tuple
    y_true: tuple
    mu: Optional[tuple] = None
    rtt: Optional[float] = None
    matched: bool = False


@dataclass
class ReplyLog:
    """Per-sample records plus derived summary quantities."""

    records: List[SampleRecord] = field(default_factory=list)

    @property
    def sent(self) -> int:
        return len(self.records)

    @property
    def received(self) -> int:
        return sum(r.matched for r in self.records)

    @property
    def lost(self) -> int:
        return self.sent - self.received

    def _errors(self, records) -> np.ndarray:
        matched = [r for r in records if r.matched]
        if not matched:
            return np.zeros((0,))
        diffs = np.array([np.subtract(r.mu, r.y_true) for r in matched])
        return diffs.ravel()

    def rmse_overall(self) -> float:
        err = self._errors(self.records)
        return float(np.sqrt(np.mean(err**2))) if err.size else math.nan

    def rmse_tail(self, k: int) -> float:
        err = self._errors(self.records[-k:]) if k >= 1 else np.zeros((0,))
        return float(np.sqrt(np.mean(err**2))) if err.size else math.nan

    def rtt_percentiles(self) -> dict:
        rtts = [r.rtt for r in self.records if r.matched and r.rtt is not None]
        if not rtts:
            return {"p50": math.nan, "p90": math.nan, "p99": math.nan}
        p50, p90, p99 = np.percentile(rtts, [50, 90, 99])
        return {"p50": float(p50), "p90": float(p90), "p99": float(p99)}


def toy_sine(count: int, d_in: int = 1, seed: int = 0,
             noise_std: float = TOY_SINE_NOISE_STD):
    """y = sin(2 pi x_1) + noise, x uniform in the unit cube; seeded."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(count, d_in))
    Y = np.sin(2 * np.pi * X[:, :1]) + noise_std * rng.normal(size=(count, 1))
    return X, Y


def load_dataset_csv(path: str):
    """Read a sample table: header ``x1..xD,y1..yK`` plus optional ``t``.

    Returns (X, Y, T) where T is None when the file has no t column.
    A present t column must be strictly increasing; duplicates are
    rejected here, before anything is sent.
    """
    try:
        f = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise ClientError(f"cannot read dataset {path!r}: {exc}") from exc
    with f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ClientError(f"dataset {path!r} is empty") from None
        header = [h.strip() for h in header]
        has_t = header and header[-1] == "t"
        columns = header[:-1] if has_t else header
        d_in = sum(1 for h in columns if h.startswith("x"))
        d_out = sum(1 for h in columns if h.startswith("y"))
        expected = ([f"x{i}" for i in range(1, d_in + 1)]
                    + [f"y{i}" for i in range(1, d_out + 1)])
        if d_in < 1 or d_out < 1 or columns != expected:
            raise ClientError(
                f"dataset {path!r} header must be x1..xD,y1..yK[,t], got {header}"
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ClientError(f"dataset {path!r} line {lineno}: wrong column count")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise ClientError(f"dataset {path!r} line {lineno}: {exc}") from exc
    if not rows:
        raise ClientError(f"dataset {path!r} has no data rows")
    data = np.asarray(rows, dtype=np.float64)
    X = data[:, :d_in]
    Y = data[:, d_in:d_in + d_out]
    T = data[:, -1] if has_t else None
    if T is not None and not np.all(np.diff(T) > 0):
        raise ClientError(
            f"dataset {path!r}: t column must be strictly increasing with no duplicates"
        )
    if not np.all(np.isfinite(X)) or not np.all(np.isfinite(Y)):
        raise ClientError(f"dataset {path!r}: x and y values must be finite")
    return X, Y, T


def _load_source(spec: StreamSpec):
    if spec.source == TOY_SINE:
        X, Y = toy_sine(spec.count, spec.d_in, spec.seed)
        return X, Y, None
    X, Y, T = load_dataset_csv(spec.source)
    if len(X) < spec.count:
        raise ClientError(
            f"dataset has {len(X)} rows, fewer than count={spec.count}"
        )
    T = T[: spec.count] if T is not None else None
    return X[: spec.count], Y[: spec.count], T


def stream(spec: StreamSpec) -> ReplyLog:
    """Send count samples at rate_hz and match replies by timestamp."""
    X, Y, T = _load_source(spec)
    d_out = Y.shape[1]

    try:
        listen_sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        listen_sock.bind(spec.listen)
    except OSError as exc:
        raise ClientError(f"cannot bind reply endpoint {spec.listen}: {exc}") from exc
    listen_sock.settimeout(0.05)
    send_sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)

    log = ReplyLog()
    pending = {}  # t bit pattern -> (record, send perf_counter)
    lock = threading.Lock()
    send_error: List[str] = []
    sender_done = threading.Event()

    def run_sender():
        interval = 1.0 / spec.rate_hz
        started = time.perf_counter()
        prev_t = -math.inf
        for i in range(spec.count):
            due = started + i * interval
            delay = due - time.perf_counter()
            if delay > 0:
                time.sleep(delay)
            if T is not None:
                t = float(T[i])
            else:
                t = time.monotonic()
                if t <= prev_t:  # coarse clocks can repeat readings
                    t = math.nextafter(prev_t, math.inf)
            prev_t = t
            record = SampleRecord(
                t=t,
                x=tuple(float(v) for v in X[i]),
                y_true=tuple(float(v) for v in Y[i]),
            )
            payload = encode_sample(X[i], Y[i], t)
            with lock:
                log.records.append(record)
                pending[struct.pack("<d", t)] = (record, time.perf_counter())
            try:
                send_sock.sendto(payload, spec.target)
            except OSError as exc:
                send_error.append(f"send to {spec.target} failed: {exc}")
                break
        sender_done.set()

    sender = threading.Thread(target=run_sender, name="gpclient-sender", daemon=True)
    sender.start()

    deadline = None
    try:
        while True:
            with lock:
                all_matched = sender_done.is_set() and not pending
            if all_matched:
                break
            if sender_done.is_set():
                if deadline is None:
                    deadline = time.perf_counter() + spec.reply_timeout
                elif time.perf_counter() > deadline:
                    break
            try:
                data, _ = listen_sock.recvfrom(65535)
            except socket.timeout:
                continue
            arrival = time.perf_counter()
            try:
                reply = decode_reply(data, d_out)
            except MalformedReplyError:
                continue  # stray datagram on the reply port
            key = struct.pack("<d", reply.t)
            with lock:
                entry = pending.pop(key, None)
            if entry is None:
                continue  # unknown or duplicate timestamp
            record, sent_at = entry
            record.mu = reply.mu
            record.rtt = arrival - sent_at
            record.matched = True
    finally:
        sender.join(timeout=5.0)
        listen_sock.close()
        send_sock.close()

    if send_error:
        raise StreamAborted(send_error[0], log)
    return log


def send_reset(target: Tuple[str, int], value: float = -1.0) -> None:
    """Fire the scalar command datagram that empties the model."""
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    try:
        sock.sendto(struct.pack("<d", value), target)
    finally:
        sock.close()


def monte_carlo(spec: StreamSpec, runs: int,
                on_reset: Optional[Callable[[int], None]] = None) -> List[ReplyLog]:
    """Reset-separated repetitions of the same stream.

    Before each run the scalar -1 command is sent and one reply_timeout
    elapses so the reset lands before new samples; ``on_reset`` is then
    called with the upcoming run index (used by tests and scripts to
    observe the emptied model through the admin API).
    """
    if not (isinstance(runs, int) and runs >= 1):
        raise ClientError("runs must be an integer >= 1")
    logs = []
    for run in range(runs):
        send_reset(spec.target)
        time.sleep(spec.reply_timeout)
        if on_reset is not None:
            on_reset(run)
        logs.append(stream(spec))
    return logs


def default_tail(count: int) -> int:
    return max(1, count // 5)


def report(log: ReplyLog, csv_path: Optional[str] = None,
           tail_k: Optional[int] = None) -> str:
    """Human-readable summary; optionally writes the per-sample CSV."""
    k = tail_k if tail_k is not None else default_tail(log.sent)
    pct = log.rtt_percentiles()

    def fmt(v: float) -> str:
        return "-" if math.isnan(v) else f"{v:.6g}"

    lines = [
        f"sent {log.sent}  received {log.received}  lost {log.lost}",
        f"rmse overall {fmt(log.rmse_overall())}  rmse tail({k}) {fmt(log.rmse_tail(k))}",
        "rtt ms p50 {}  p90 {}  p99 {}".format(
            fmt(pct["p50"] * 1e3), fmt(pct["p90"] * 1e3), fmt(pct["p99"] * 1e3)
        ),
    ]
    text = "\n".join(lines)
    if csv_path is not None:
        write_csv(log, csv_path)
    return text


def write_csv(log: ReplyLog, path: str) -> None:
    """Per-sample table: index,t,matched,rtt,x1..xD,y1..yK,mu1..muK."""
    d_in = len(log.records[0].x) if log.records else 0
    d_out = len(log.records[0].y_true) if log.records else 0
    header = (["index", "t", "matched", "rtt"]
              + [f"x{i}" for i in range(1, d_in + 1)]
              + [f"y{i}" for i in range(1, d_out + 1)]
              + [f"mu{i}" for i in range(1, d_out + 1)])
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for i, r in enumerate(log.records):
            mu_cells = [repr(v) for v in r.mu] if r.matched else [""] * d_out
            rtt = f"{r.rtt:.9f}" if r.rtt is not None else ""
            writer.writerow(
                [i, repr(r.t), int(r.matched), rtt]
                + [repr(v) for v in r.x] + [repr(v) for v in r.y_true]
                + mu_cells
            )
