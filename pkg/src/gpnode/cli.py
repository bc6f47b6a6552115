"""Command-line entry points: the service and the streaming client."""

from __future__ import annotations

import argparse
import logging
import os
import signal
import sys
import threading
from pathlib import Path
from typing import List, Optional, Tuple

from .admin import AdminServer
from .client import (
    ClientError,
    StreamAborted,
    StreamSpec,
    default_tail,
    monte_carlo,
    report,
    stream,
    write_csv,
)
from .service import (
    GPNode,
    InvalidConfigError,
    ServiceError,
    build_node,
    load_config_file,
)

log = logging.getLogger("gpnode.cli")


def _setup_logging() -> None:
    logging.basicConfig(
        level=os.environ.get("GPNODE_LOG", "INFO").upper(),
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
    )


def _parse_address(text: str) -> Tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not host:
        raise argparse.ArgumentTypeError(f"{text!r} is not IP:PORT")
    try:
        port_num = int(port)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} has a non-integer port")
    if not 1 <= port_num <= 65535:
        raise argparse.ArgumentTypeError(f"port in {text!r} is out of range")
    return host, port_num


# ----------------------------------------------------------------------
# gpserve


def _serve_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="gpserve",
        description="Run the UDP regression node with its admin API.",
    )
    p.add_argument("--config", required=True, help="node configuration JSON file")
    p.add_argument("--slot", type=int, default=0,
                   help="slot the endpoint/preset flags apply to (default 0)")
    p.add_argument("--read-ip", help="override the slot's read IP")
    p.add_argument("--read-port", type=int, help="override the slot's read port")
    p.add_argument("--send-ip", help="override the slot's send IP")
    p.add_argument("--send-port", type=int, help="override the slot's send port")
    p.add_argument("--rate", type=float, help="override the slot's max poll rate (Hz)")
    p.add_argument("--preset", help="apply a named preset to the slot")
    p.add_argument("--admin-port", type=int, help="override the admin API port")
    p.add_argument("--headless", action="store_true",
                   help="run autostart slots without the admin API or console")
    p.add_argument("--seed", type=int, help="override the node RNG seed")
    p.add_argument("--console-dir",
                   help="directory of console files to serve at / "
                        "(default: $GPNODE_CONSOLE_DIR)")
    return p


def serve_main(argv: Optional[List[str]] = None) -> int:
    _setup_logging()
    args = _serve_parser().parse_args(argv)
    try:
        doc = load_config_file(args.config)
        if args.seed is not None:
            doc["seed"] = args.seed
        if args.admin_port is not None:
            doc["admin_port"] = args.admin_port
        node = build_node(doc)

        endpoint_overrides = {}
        if args.read_ip is not None:
            endpoint_overrides["read_ip"] = args.read_ip
        if args.read_port is not None:
            endpoint_overrides["read_port"] = args.read_port
        if args.send_ip is not None:
            endpoint_overrides["send_ip"] = args.send_ip
        if args.send_port is not None:
            endpoint_overrides["send_port"] = args.send_port
        if args.rate is not None:
            endpoint_overrides["listen_rate_hz"] = args.rate

        flagged = bool(endpoint_overrides or args.preset)
        if flagged:
            slot = node.get_slot(args.slot)
            if endpoint_overrides:
                slot.set_endpoint(slot.endpoint.merged(endpoint_overrides))
            if args.preset:
                node.apply_preset(args.slot, args.preset)
            if args.slot not in node.autostart_ids:
                node.autostart_ids.append(args.slot)

        if args.headless and not node.autostart_ids:
            raise InvalidConfigError(
                "headless mode needs at least one autostart slot "
                "(config \"autostart\": true, or endpoint/preset flags)"
            )

        for slot_id in node.autostart_ids:
            slot = node.get_slot(slot_id)
            slot.activate_udp()
            slot.activate_gp()
            slot.start()

        admin = None
        if not args.headless:
            console_dir = args.console_dir or os.environ.get("GPNODE_CONSOLE_DIR")
            if console_dir and not Path(console_dir).is_dir():
                raise InvalidConfigError(f"console dir {console_dir!r} does not exist")
            admin = AdminServer(node, static_dir=console_dir)
            admin.start()
            log.info("console and API at %s", admin.url)
    except ServiceError as exc:
        print(f"gpserve: {exc.code}: {exc}", file=sys.stderr)
        return 2

    stop = threading.Event()

    def on_signal(signum, frame):
        log.info("signal %d, shutting down", signum)
        stop.set()

    signal.signal(signal.SIGINT, on_signal)
    signal.signal(signal.SIGTERM, on_signal)
    try:
        stop.wait()
    finally:
        if admin is not None:
            admin.stop()
        node.shutdown()
    return 0


# ----------------------------------------------------------------------
# gpclient


def _client_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="gpclient",
        description="Stream samples to a node and evaluate its replies.",
    )
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("stream", help="send samples, match replies, report")
    s.add_argument("--target", type=_parse_address, required=True,
                   help="service read endpoint, IP:PORT")
    s.add_argument("--listen", type=_parse_address, required=True,
                   help="local reply endpoint, IP:PORT")
    s.add_argument("--source", default="toy-sine",
                   help="dataset CSV path or 'toy-sine' (default)")
    s.add_argument("--rate", type=float, default=200.0, help="send rate in Hz")
    s.add_argument("--count", type=int, default=1000, help="samples per run")
    s.add_argument("--runs", type=int, default=1,
                   help="reset-separated repetitions (default 1)")
    s.add_argument("--timeout", type=float, default=1.0,
                   help="reply drain timeout in seconds")
    s.add_argument("--out", help="write per-sample CSV here")
    s.add_argument("--seed", type=int, default=0, help="toy-sine RNG seed")
    return p


def _run_csv_path(base: str, run: int, runs: int) -> str:
    if runs == 1:
        return base
    path = Path(base)
    return str(path.with_name(f"{path.stem}.run{run + 1}{path.suffix}"))


def client_main(argv: Optional[List[str]] = None) -> int:
    _setup_logging()
    args = _client_parser().parse_args(argv)
    try:
        spec = StreamSpec(
            target=args.target,
            listen=args.listen,
            source=args.source,
            rate_hz=args.rate,
            count=args.count,
            reply_timeout=args.timeout,
            seed=args.seed,
        )
        if args.runs == 1:
            logs = [stream(spec)]
        else:
            logs = monte_carlo(spec, runs=args.runs)
    except StreamAborted as exc:
        print(report(exc.log), file=sys.stderr)
        print(f"gpclient: aborted: {exc}", file=sys.stderr)
        return 1
    except ClientError as exc:
        print(f"gpclient: {exc}", file=sys.stderr)
        return 2

    for run, log_ in enumerate(logs):
        if len(logs) > 1:
            print(f"run {run + 1}/{len(logs)}")
        print(report(log_, tail_k=default_tail(log_.sent)))
        if args.out:
            write_csv(log_, _run_csv_path(args.out, run, len(logs)))
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    """Dispatcher for ``python3 -m gpnode {serve,client} ...``."""
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help"):
        print("usage: python3 -m gpnode {serve,client} ...", file=sys.stderr)
        return 0 if argv else 2
    head, rest = argv[0], argv[1:]
    if head == "serve":
        return serve_main(rest)
    if head == "client":
        return client_main(rest)
    print(f"unknown command {head!r}; expected 'serve' or 'client'", file=sys.stderr)
    return 2
