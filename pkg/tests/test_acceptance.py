"""Acceptance suite: one test and one printed pass/fail line per criterion.

Run with ``python3 -m pytest tests/test_acceptance.py -v -s`` to see the
per-criterion lines as they complete.
"""

import contextlib
import math
import socket
import struct
import time

import numpy as np
import pytest

from gpnode.client import StreamSpec, monte_carlo, stream, toy_sine
from gpnode.gp import Hyperparameters, LocalGP, fit, kernel_eval
from gpnode.presets import load_preset
from gpnode.service import EndpointConfig, ModelSlot
from gpnode.tree import LocalGPTree, TreeConfig
from gpnode.wire import (
    Command,
    Malformed,
    Sample,
    decode_datagram,
    decode_reply,
    encode_reply,
    encode_sample,
)


@contextlib.contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE FAIL: {name}")
        raise
    print(f"ACCEPTANCE PASS: {name}")


def kernel_oracle(x, x2, hp):
    """Plain-Python evaluation, independent of the vectorized route."""
    s = 0.0
    for a, b, l in zip(x, x2, hp.length_scales):
        s += ((a - b) / l) ** 2
    return hp.sigma_f**2 * math.exp(-0.5 * s)


def free_port():
    s = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    return port


def running_slot(tree_config, listen_rate_hz=5000.0):
    endpoint = EndpointConfig(read_port=free_port(), send_port=free_port(),
                              listen_rate_hz=listen_rate_hz)
    slot = ModelSlot(0, endpoint, tree_config)
    slot.activate_udp()
    slot.activate_gp()
    slot.start()
    return slot


def test_kernel_correctness():
    with criterion("kernel correctness (1,000 triples, symmetry exact, "
                   "direct eval within 1e-14 relative)"):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            d = int(rng.integers(1, 5))
            hp = Hyperparameters(
                sigma_f=float(rng.uniform(0.1, 3.0)),
                length_scales=rng.uniform(1.0, 2.0, size=d),
                sigma_n=0.1,
                d_in=d,
                d_out=1,
            )
            x = rng.uniform(-1.0, 1.0, size=d)
            x2 = rng.uniform(-1.0, 1.0, size=d)
            k = kernel_eval(x, x2, hp)
            assert k == kernel_eval(x2, x, hp)
            o = kernel_oracle(x, x2, hp)
            assert abs(k - o) <= 1e-14 * abs(o)


def test_exact_gp_oracle():
    with criterion("exact-GP oracle (single leaf, 150 points, dense solve, "
                   "mean and variance within 1e-8 at 50 probes)"):
        rng = np.random.default_rng(7)
        hp = Hyperparameters(
            sigma_f=1.2,
            length_scales=np.array([0.6, 0.8, 1.1]),
            sigma_n=0.15,
            d_in=3,
            d_out=2,
        )
        X = rng.uniform(0.0, 1.0, size=(150, 3))
        Y = np.column_stack([
            np.sin(2.0 * np.pi * X[:, 0]) + 0.1 * rng.standard_normal(150),
            np.cos(np.pi * X[:, 1]) * X[:, 2] + 0.1 * rng.standard_normal(150),
        ])

        tree = LocalGPTree(TreeConfig(max_leaves=1, max_local_data=200, hp=hp))
        for x, y in zip(X, Y):
            outcome = tree.insert(x, y)
            assert outcome.stored
        assert tree.stats().leaves == 1

        K = np.array([[kernel_oracle(a, b, hp) for b in X] for a in X])
        A = K + hp.sigma_n**2 * np.eye(150)
        coef = np.linalg.solve(A, Y)

        leaf_model = next(tree.iter_leaves()).model
        probes = rng.uniform(0.0, 1.0, size=(50, 3))
        for p in probes:
            kvec = np.array([kernel_oracle(a, p, hp) for a in X])
            mean_oracle = kvec @ coef
            var_oracle = hp.sigma_f**2 - kvec @ np.linalg.solve(A, kvec)
            np.testing.assert_allclose(tree.predict(p), mean_oracle,
                                       rtol=0.0, atol=1e-8)
            assert abs(leaf_model.predict_var(p) - var_oracle) <= 1e-8


def test_incremental_equivalence():
    with criterion("incremental equivalence (200 sequential updates vs one "
                   "batch fit, within 1e-6 at 50 probes)"):
        rng = np.random.default_rng(11)
        hp = Hyperparameters(
            sigma_f=0.9,
            length_scales=np.array([0.5, 1.5]),
            sigma_n=0.2,
            d_in=2,
            d_out=1,
        )
        X = rng.uniform(-1.0, 1.0, size=(200, 2))
        Y = (np.sin(3.0 * X[:, 0]) * X[:, 1]).reshape(-1, 1)

        incremental = LocalGP(hp)
        for x, y in zip(X, Y):
            incremental.add_point(x, y)
        batch = fit(X, Y, hp)

        probes = rng.uniform(-1.0, 1.0, size=(50, 2))
        for p in probes:
            np.testing.assert_allclose(
                incremental.predict_mean(p), batch.predict_mean(p),
                rtol=0.0, atol=1e-6,
            )
            assert abs(incremental.predict_var(p) - batch.predict_var(p)) <= 1e-6


def test_tree_mechanics():
    with criterion("tree mechanics (one split at capacity+1, conservation, "
                   "10,000-insert capacity bound, weights sum to 1 within "
                   "1e-12 at 1,000 probes)"):
        hp = Hyperparameters(1.0, np.array([0.3, 0.3]), 0.1, 2, 1)
        rng = np.random.default_rng(5)

        cap = 24
        tree = LocalGPTree(TreeConfig(max_leaves=8, max_local_data=cap,
                                      hp=hp, rng_seed=1))
        pts = rng.uniform(0.0, 1.0, size=(cap + 1, 2))
        for x in pts[:cap]:
            outcome = tree.insert(x, [0.5])
            assert not outcome.split_occurred
        assert tree.stats().leaves == 1
        outcome = tree.insert(pts[cap], [0.5])
        assert outcome.split_occurred
        stats = tree.stats()
        assert stats.leaves == 2
        assert stats.stored_points == cap + 1

        fuzz = LocalGPTree(TreeConfig(max_leaves=6, max_local_data=16,
                                      hp=hp, rng_seed=2))
        bound = 6 * 16
        for i in range(10_000):
            x = rng.uniform(-2.0, 2.0, size=2)
            fuzz.insert(x, [float(np.sin(x[0]))])
            assert fuzz.stats().stored_points <= bound
        assert fuzz.stats().leaves <= 6

        for _ in range(1000):
            probe = rng.uniform(-4.0, 4.0, size=2)
            total = sum(w for _, w in fuzz.leaf_weights(probe))
            assert abs(total - 1.0) <= 1e-12


def _prediction_trace(tree, stream_pts, probes):
    out = []
    for x, y in stream_pts:
        tree.insert(x, y)
        out.append(struct.pack("<d", float(tree.predict(x)[0])))
    for p in probes:
        out.append(struct.pack("<d", float(tree.predict(p)[0])))
    return out


def test_determinism():
    with criterion("determinism (bitwise-identical predictions across two "
                   "runs and across a reset boundary)"):
        hp = Hyperparameters(1.0, np.array([0.25, 0.25]), 0.1, 2, 1)
        cfg = TreeConfig(max_leaves=8, max_local_data=24, hp=hp, rng_seed=42)
        rng = np.random.default_rng(13)
        pts = [(rng.uniform(0.0, 1.0, size=2),
                [float(np.sin(6.0 * rng.uniform()))]) for _ in range(500)]
        probes = [rng.uniform(0.0, 1.0, size=2) for _ in range(5)]

        first = _prediction_trace(LocalGPTree(cfg), pts, probes)
        second = _prediction_trace(LocalGPTree(cfg), pts, probes)
        assert first == second

        reused = LocalGPTree(cfg)
        _prediction_trace(reused, pts, probes)
        reused.reset()
        assert reused.stats().stored_points == 0
        after_reset = _prediction_trace(reused, pts, probes)
        assert after_reset == first


def test_protocol():
    with criterion("protocol (10,000-message bitwise round-trip, "
                   "10,000-datagram trichotomy fuzz with zero crashes, "
                   "bit-exact timestamp echo including NaN payloads)"):
        rng = np.random.default_rng(99)

        for _ in range(10_000):
            kind = rng.integers(0, 3)
            if kind == 0:
                raw = rng.bytes(8)
                msg = decode_datagram(raw, d_in=3, d_out=2)
                assert isinstance(msg, Command)
                assert struct.pack("<d", msg.value) == raw
            elif kind == 1:
                d_in = int(rng.integers(1, 5))
                d_out = int(rng.integers(1, 4))
                x = tuple(rng.uniform(-10.0, 10.0, size=d_in))
                y = tuple(rng.uniform(-10.0, 10.0, size=d_out))
                t = struct.unpack("<d", rng.bytes(8))[0]
                raw = encode_sample(x, y, t)
                msg = decode_datagram(raw, d_in, d_out)
                assert isinstance(msg, Sample)
                assert encode_sample(msg.x, msg.y, msg.t) == raw
            else:
                d_out = int(rng.integers(1, 4))
                mu = tuple(rng.uniform(-10.0, 10.0, size=d_out))
                t = struct.unpack("<d", rng.bytes(8))[0]
                raw = encode_reply(mu, t)
                msg = decode_reply(raw, d_out)
                assert encode_reply(msg.mu, msg.t) == raw

        for _ in range(10_000):
            if rng.random() < 0.5:
                length = int(rng.integers(0, 16)) * 8
            else:
                length = int(rng.integers(0, 129))
            raw = rng.bytes(length)
            d_in = int(rng.integers(1, 5))
            d_out = int(rng.integers(1, 4))
            msg = decode_datagram(raw, d_in, d_out)
            assert isinstance(msg, (Command, Sample, Malformed))

        hp = Hyperparameters(1.0, np.array([0.2]), 0.1, 1, 1)
        slot = ModelSlot(0, EndpointConfig(),
                         TreeConfig(max_leaves=2, max_local_data=8, hp=hp))
        slot.activate_gp()
        patterns = [
            bytes.fromhex("0100000000 00f87f".replace(" ", "")),
            bytes.fromhex("2301000000 00f8ff".replace(" ", "")),
            struct.pack("<d", math.inf),
            struct.pack("<d", -math.inf),
            struct.pack("<d", -0.0),
            struct.pack("<Q", 0x7FF0000000DEAD01),
        ] + [rng.bytes(8) for _ in range(500)]
        for t_bits in patterns:
            body = struct.pack("<2d", 0.25, 1.0)
            reply = slot.handle_datagram(body + t_bits)
            assert reply is not None
            assert reply[-8:] == t_bits


def test_end_to_end_loopback():
    with criterion("end-to-end loopback (Toy preset, 2,000 samples at "
                   "200 Hz: 0 lost, tail RMSE <= 2.5 x sigma_n, wall <= 15 s, "
                   "counters match the tree)"):
        preset = load_preset("Toy")
        slot = running_slot(preset.tree_config(rng_seed=0),
                            listen_rate_hz=1000.0)
        try:
            spec = StreamSpec(
                target=("127.0.0.1", slot.endpoint.read_port),
                listen=("127.0.0.1", slot.endpoint.send_port),
                rate_hz=200.0,
                count=2000,
                reply_timeout=2.0,
                seed=0,
            )
            started = time.monotonic()
            log = stream(spec)
            wall = time.monotonic() - started

            assert log.lost == 0
            sigma_n = preset.sigma_n
            assert log.rmse_tail(400) <= 2.5 * sigma_n, log.rmse_tail(400)
            assert wall <= 15.0, wall

            metrics = slot.metrics_snapshot()
            assert metrics.received_quantity == 2000
            assert metrics.stored_quantity == slot.tree.stats().stored_points
        finally:
            slot.stop()


def test_saturation_divergence():
    with criterion("saturation divergence (2 leaves x 16 points, 200 samples: "
                   "received exceeds stored, stored <= 32)"):
        hp = Hyperparameters(1.0, np.array([0.2]), 0.1, 1, 1)
        cfg = TreeConfig(max_leaves=2, max_local_data=16, hp=hp, rng_seed=0)
        slot = running_slot(cfg)
        try:
            spec = StreamSpec(
                target=("127.0.0.1", slot.endpoint.read_port),
                listen=("127.0.0.1", slot.endpoint.send_port),
                rate_hz=1000.0,
                count=200,
                reply_timeout=2.0,
                seed=4,
            )
            log = stream(spec)
            assert log.lost == 0
            metrics = slot.metrics_snapshot()
            assert metrics.received_quantity == 200
            assert metrics.stored_quantity <= 32
            assert metrics.received_quantity > metrics.stored_quantity
        finally:
            slot.stop()


def test_monte_carlo_reset():
    with criterion("Monte-Carlo reset (3 reset-separated runs: identical "
                   "RMSE within 1e-12, stored_quantity 0 after each reset)"):
        hp = Hyperparameters(1.0, np.array([0.2]), 0.1, 1, 1)
        cfg = TreeConfig(max_leaves=8, max_local_data=32, hp=hp, rng_seed=3)
        slot = running_slot(cfg)
        try:
            spec = StreamSpec(
                target=("127.0.0.1", slot.endpoint.read_port),
                listen=("127.0.0.1", slot.endpoint.send_port),
                rate_hz=1000.0,
                count=250,
                reply_timeout=1.0,
                seed=11,
            )
            stored_after_reset = []

            def on_reset(run):
                stored_after_reset.append(
                    slot.metrics_snapshot().stored_quantity)

            logs = monte_carlo(spec, runs=3, on_reset=on_reset)
            assert stored_after_reset == [0, 0, 0]
            assert all(log.lost == 0 for log in logs)
            rmses = [log.rmse_overall() for log in logs]
            assert max(rmses) - min(rmses) <= 1e-12, rmses
        finally:
            slot.stop()
