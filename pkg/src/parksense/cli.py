"""Command-line entry points: server, client agent, blur metric, benchmarks.

Configuration is a flat ``key = value`` text file; any value can be
overridden by the matching command-line flag.  Exit codes: 0 on success,
2 when the protocol (or local validation) rejects the request, 3 on
transport failures.
"""

from __future__ import annotations

import argparse
import os
import secrets
import sys
import threading

from . import bench, blur
from .client import Client, ClientError
from .netio import ProtocolServer, RemoteServer, TransportError
from .protocol import Rejection
from .server import Server, ServerConfig
from .wire import WireError

EXIT_OK = 0
EXIT_REJECTED = 2
EXIT_TRANSPORT = 3

_CONFIG_KEYS = {
    "group_bits",
    "key_bits",
    "b0",
    "c_q",
    "credit_per_entry",
    "epsilon",
    "slot_length",
    "nn_bits",
    "session_timeout",
    "listen",
    "journal",
    "seed",
    "server",
    "state",
}


class ConfigError(Exception):
    """Bad config file, bad flag value, or unusable local state."""


def load_config(path: str) -> dict[str, str]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("cannot read config file %s: %s" % (path, exc)) from exc
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key or not value:
            raise ConfigError("%s:%d: expected 'key = value'" % (path, lineno))
        if key not in _CONFIG_KEYS:
            raise ConfigError("%s:%d: unknown key %r" % (path, lineno, key))
        if key in values:
            raise ConfigError("%s:%d: duplicate key %r" % (path, lineno, key))
        values[key] = value
    return values


class _Settings:
    """Config values with CLI flags layered on top."""

    def __init__(self, config: dict[str, str], args: argparse.Namespace):
        self._config = config
        self._args = args

    def get(self, key: str, default=None, cast=str):
        flag = getattr(self._args, key, None)
        raw = flag if flag is not None else self._config.get(key)
        if raw is None:
            return default
        try:
            return cast(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError("bad value for %s: %r" % (key, raw)) from exc


def _settings(args: argparse.Namespace) -> _Settings:
    config = load_config(args.config) if getattr(args, "config", None) else {}
    return _Settings(config, args)


def _parse_address(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not host:
        raise ConfigError("address must be host:port, got %r" % text)
    try:
        number = int(port)
    except ValueError as exc:
        raise ConfigError("bad port in %r" % text) from exc
    if not 0 <= number <= 65535:
        raise ConfigError("port out of range in %r" % text)
    return host, number


def _parse_seed(text: str) -> bytes:
    try:
        return bytes.fromhex(text)
    except ValueError as exc:
        raise ConfigError("seed must be a hex string") from exc


# -- server ------------------------------------------------------------------


def cmd_server_run(args: argparse.Namespace) -> int:
    s = _settings(args)
    seed = s.get("seed", cast=_parse_seed) or secrets.token_bytes(16)
    config = ServerConfig.from_seed(
        seed,
        group_bits=s.get("group_bits", 2048, int),
        key_bits=s.get("key_bits", 2048, int),
        b0=s.get("b0", 0, int),
        c_q=s.get("c_q", 1, int),
        credit_per_entry=s.get("credit_per_entry", 1, int),
        epsilon=s.get("epsilon", 1, int),
        slot_length=s.get("slot_length", 1.0, float),
        nn_bits=s.get("nn_bits", 32, int),
        session_timeout=s.get("session_timeout", 300.0, float),
        journal_path=s.get("journal"),
    )
    host, port = s.get("listen", ("127.0.0.1", 0), _parse_address)
    with Server(config) as srv, ProtocolServer(srv, host, port) as ps:
        print("listening on %s:%d" % ps.address, flush=True)
        try:
            threading.Event().wait()
        except KeyboardInterrupt:
            pass
    return EXIT_OK


# -- client ------------------------------------------------------------------


def _remote(s: _Settings) -> RemoteServer:
    address = s.get("server", cast=_parse_address)
    if address is None:
        raise ConfigError("no server address (set 'server' or pass --server)")
    return RemoteServer(address).connect()


def _state_path(s: _Settings) -> str:
    path = s.get("state")
    if path is None:
        raise ConfigError("no state file (set 'state' or pass --state)")
    return path


def _load_client(s: _Settings, remote: RemoteServer) -> Client:
    path = _state_path(s)
    try:
        return Client.load(path, remote.fetch_bundle())
    except OSError as exc:
        raise ConfigError("cannot read state file %s: %s" % (path, exc)) from exc


def cmd_client_register(args: argparse.Namespace) -> int:
    s = _settings(args)
    path = _state_path(s)
    if os.path.exists(path):
        raise ConfigError("state file %s already exists; refusing to overwrite" % path)
    with _remote(s) as remote:
        client = Client(remote.fetch_bundle())
        client.register_with(remote)
        client.save(path)
    print("registered balance=%d" % client.balance)
    return EXIT_OK


def cmd_client_submit(args: argparse.Namespace) -> int:
    s = _settings(args)
    with _remote(s) as remote:
        client = _load_client(s, remote)
        slot = args.slot if args.slot is not None else client.current_slot()
        status = client.submit_to(remote, args.space, slot, args.availability)
        client.save(_state_path(s))
    print("space=%s slot=%d status=%s" % (args.space, slot, status))
    return EXIT_OK


def cmd_client_claim(args: argparse.Namespace) -> int:
    s = _settings(args)
    with _remote(s) as remote:
        client = _load_client(s, remote)
        credit = client.run_claim(remote, args.space, args.slot)
        client.save(_state_path(s))
    print("credit=%d balance=%d" % (credit, client.balance))
    return EXIT_OK


def cmd_client_inquire(args: argparse.Namespace) -> int:
    s = _settings(args)
    with _remote(s) as remote:
        client = _load_client(s, remote)
        statuses = client.run_inquiry(remote, args.spaces)
        client.save(_state_path(s))
    for space, status in zip(args.spaces, statuses):
        print("space=%s status=%s" % (space, status))
    print("balance=%d" % client.balance)
    return EXIT_OK


# -- blur ---------------------------------------------------------------------


def cmd_blur_compute(args: argparse.Namespace) -> int:
    try:
        img = blur.load_pnm_file(args.image)
        print("edge-sharpness=%.6g" % blur.edge_sharpness(img))
        if args.reference is not None:
            ref = blur.load_pnm_file(args.reference)
            print("reference-sharpness=%.6g" % blur.edge_sharpness(ref))
            print("blurriness=%.6g" % blur.blurriness(ref, img))
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return EXIT_OK


# -- bench --------------------------------------------------------------------


def _print_rows(rows) -> None:
    for row in rows:
        print(row.format())


def cmd_bench_stages(args: argparse.Namespace) -> int:
    metrics, rows = bench.run_stage_bench(reps=args.reps, seed=args.seed)
    print("# stage          user_ms  server_ms  user_B  server_B")
    for m in metrics:
        print(
            "# %-14s %8.3f %10.3f %7d %9d"
            % (m.stage, m.user_time_s * 1e3, m.server_time_s * 1e3, m.user_bytes, m.server_bytes)
        )
    _print_rows(rows)
    return EXIT_OK


def cmd_bench_confirm(args: argparse.Namespace) -> int:
    result = bench.run_confirm_bench(rep_budget=args.budget, seed=args.seed)
    print("# users   same_ms  distinct_ms")
    for u in result["user_counts"]:
        print("# %5d %9.3f %12.3f" % (u, result["same"][u] * 1e3, result["distinct"][u] * 1e3))
    _print_rows(result["rows"])
    return EXIT_OK


def cmd_bench_backends(args: argparse.Namespace) -> int:
    _print_rows(bench.run_backend_bench(reps=args.reps, seed=args.seed))
    return EXIT_OK


# -- parser -------------------------------------------------------------------


def _add_config_flags(parser: argparse.ArgumentParser, *keys: str) -> None:
    parser.add_argument("--config", metavar="FILE", help="flat key = value config file")
    for key in keys:
        parser.add_argument("--" + key.replace("_", "-"), dest=key, metavar="VALUE")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="parksense")
    top = parser.add_subparsers(dest="group", required=True)

    server = top.add_parser("server", help="run the crowdsensing server")
    server_sub = server.add_subparsers(dest="command", required=True)
    run = server_sub.add_parser("run", help="serve until interrupted")
    _add_config_flags(
        run,
        "group_bits",
        "key_bits",
        "b0",
        "c_q",
        "credit_per_entry",
        "epsilon",
        "slot_length",
        "nn_bits",
        "session_timeout",
        "listen",
        "journal",
        "seed",
    )
    run.set_defaults(func=cmd_server_run)

    client = top.add_parser("client", help="user agent commands")
    client_sub = client.add_subparsers(dest="command", required=True)

    register = client_sub.add_parser("register", help="obtain a credential")
    _add_config_flags(register, "server", "state")
    register.set_defaults(func=cmd_client_register)

    submit = client_sub.add_parser("submit", help="submit one availability report")
    _add_config_flags(submit, "server", "state")
    submit.add_argument("--space", required=True, help="parking space identifier")
    submit.add_argument("--slot", type=int, help="time slot (default: current)")
    submit.add_argument(
        "--availability", required=True, type=int, choices=(0, 1), help="0 occupied, 1 available"
    )
    submit.set_defaults(func=cmd_client_submit)

    claim = client_sub.add_parser("claim", help="claim credit for a confirmed report")
    _add_config_flags(claim, "server", "state")
    claim.add_argument("--space", required=True)
    claim.add_argument("--slot", required=True, type=int)
    claim.set_defaults(func=cmd_client_claim)

    inquire = client_sub.add_parser("inquire", help="query space availability")
    _add_config_flags(inquire, "server", "state")
    inquire.add_argument("spaces", nargs="+", metavar="SPACE")
    inquire.set_defaults(func=cmd_client_inquire)

    blur_cmd = top.add_parser("blur", help="edge-sharpness blurriness metric")
    blur_sub = blur_cmd.add_subparsers(dest="command", required=True)
    compute = blur_sub.add_parser("compute", help="score a P2/P3 image")
    compute.add_argument("image", help="plain-text PGM/PPM file")
    compute.add_argument("--reference", help="unblurred original for the relative metric")
    compute.set_defaults(func=cmd_blur_compute)

    bench_cmd = top.add_parser("bench", help="evaluation harness")
    bench_sub = bench_cmd.add_subparsers(dest="command", required=True)

    stages = bench_sub.add_parser("stages", help="per-stage running time and bytes")
    stages.add_argument("--reps", type=int, default=5)
    stages.add_argument("--seed", type=int, default=1)
    stages.set_defaults(func=cmd_bench_stages)

    confirm = bench_sub.add_parser("confirm", help="confirmation time vs. user count")
    confirm.add_argument("--budget", type=int, default=900, help="total submissions per variant")
    confirm.add_argument("--seed", type=int, default=1)
    confirm.set_defaults(func=cmd_bench_confirm)

    backends = bench_sub.add_parser("backends", help="native vs. pure kernel comparison")
    backends.add_argument("--reps", type=int, default=200)
    backends.add_argument("--seed", type=int, default=1)
    backends.set_defaults(func=cmd_bench_backends)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Rejection as rej:
        print("rejected: %s %s" % (rej.stage, rej.reason), file=sys.stderr)
        return EXIT_REJECTED
    except (ClientError, ConfigError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_REJECTED
    except (TransportError, WireError, ConnectionError, OSError) as exc:
        print("transport error: %s" % exc, file=sys.stderr)
        return EXIT_TRANSPORT


if __name__ == "__main__":
    sys.exit(main())
