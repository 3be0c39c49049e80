"""Socket transport: threaded protocol server and the client-side proxy.

ProtocolServer wraps an in-process Server behind the wire protocol; one
thread per connection, one request-reply exchange per frame.  RemoteServer
is the mirror image: it satisfies the same method surface as Server, so a
Client can drive either without knowing which it holds.

Both sides keep StageCounter accumulators counting whole frames (header
included), which is what the bench harness reads.  The server side records
thread CPU time per request (processing cost), the client side wall time
(perceived latency).
"""

from __future__ import annotations

import secrets
import socket
import threading
import time
from dataclasses import dataclass

from .protocol import REASON_BAD_REQUEST, PublicBundle, Rejection
from .server import Server
from . import wire
from .wire import WireError, WireMessage


class TransportError(Exception):
    """Connection-level failure: refused, dropped, truncated, or oversized."""


@dataclass
class StageCounter:
    stage: str
    calls: int = 0
    time_s: float = 0.0
    bytes_total: int = 0
    first_start: float | None = None
    last_end: float | None = None

    @property
    def span_s(self) -> float:
        """Wall time from the first request arriving to the last reply leaving."""
        if self.first_start is None or self.last_end is None:
            return 0.0
        return self.last_end - self.first_start


class MetricsCollector:
    """Thread-safe per-stage accumulator of time, framed bytes, and span."""

    def __init__(self):
        self._lock = threading.Lock()
        self._stages: dict[str, StageCounter] = {}

    def add(
        self,
        stage: str,
        started: float,
        finished: float,
        nbytes: int,
        busy: float | None = None,
    ) -> None:
        """Record one exchange; busy overrides the wall duration when the
        caller has a better measure of actual processing time."""
        with self._lock:
            m = self._stages.setdefault(stage, StageCounter(stage))
            m.calls += 1
            m.time_s += (finished - started) if busy is None else busy
            m.bytes_total += nbytes
            if m.first_start is None or started < m.first_start:
                m.first_start = started
            if m.last_end is None or finished > m.last_end:
                m.last_end = finished

    def snapshot(self) -> dict[str, StageCounter]:
        with self._lock:
            return {
                stage: StageCounter(
                    stage, m.calls, m.time_s, m.bytes_total, m.first_start, m.last_end
                )
                for stage, m in self._stages.items()
            }

    def reset(self) -> None:
        with self._lock:
            self._stages.clear()


class ProtocolServer:
    def __init__(self, server: Server, host: str = "127.0.0.1", port: int = 0):
        self._srv = server
        self._params = server.config.params
        self.metrics = MetricsCollector()
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((host, port))
        self._sock.listen(64)
        self.address = self._sock.getsockname()
        self._stop = threading.Event()
        self._accept_thread: threading.Thread | None = None
        self._conn_threads: list[threading.Thread] = []
        self._conns: set[socket.socket] = set()
        self._conns_lock = threading.Lock()

    def start(self) -> "ProtocolServer":
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()
        return self

    def close(self) -> None:
        self._stop.set()
        # shutdown() wakes a thread blocked in accept(); close() alone does not.
        for sock in [self._sock] + list(self._conns):
            try:
                sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
        try:
            self._sock.close()
        except OSError:
            pass
        if self._accept_thread is not None:
            self._accept_thread.join(timeout=5)
        for t in self._conn_threads:
            t.join(timeout=5)

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.close()

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                conn, _addr = self._sock.accept()
            except OSError:
                return
            with self._conns_lock:
                self._conns.add(conn)
            thread = threading.Thread(target=self._handle_conn, args=(conn,), daemon=True)
            thread.start()
            self._conn_threads.append(thread)

    def _handle_conn(self, conn: socket.socket) -> None:
        try:
            self._serve_conn(conn)
        finally:
            with self._conns_lock:
                self._conns.discard(conn)

    def _serve_conn(self, conn: socket.socket) -> None:
        with conn:
            conn.settimeout(30.0)
            while not self._stop.is_set():
                try:
                    frame = wire.recv_frame(conn)
                    if frame is None:
                        return
                    started = time.perf_counter()
                    cpu0 = time.thread_time()
                    msg = wire.decode_message(frame)
                    payload = wire.encode_message(self._dispatch(msg))
                    busy = time.thread_time() - cpu0
                    # Record before the send so the counters are already
                    # consistent when the client sees the reply.  Durations
                    # are thread CPU time: with many concurrent handlers the
                    # wall clock mostly measures scheduling, not work.
                    self.metrics.add(
                        msg.stage,
                        started,
                        time.perf_counter(),
                        8 + len(frame) + len(payload),
                        busy=busy,
                    )
                    wire.send_frame(conn, payload)
                except (WireError, OSError):
                    # Frame-level damage: nothing sensible to reply to.
                    return

    def _dispatch(self, msg: WireMessage) -> WireMessage:
        params = self._params
        stage, session = msg.stage, msg.session
        try:
            if stage == "setup":
                wire.decode_setup_request(msg)
                return wire.encode_setup_reply(session, self._srv.bundle())
            if stage == "register":
                cm_s1, cm_q = wire.decode_register_request(params, msg)
                s2, sig = self._srv.register(cm_s1, cm_q)
                return wire.encode_register_reply(params, session, s2, sig)
            if stage == "submit":
                entry, proof = wire.decode_submit_request(params, msg)
                status = self._srv.handle_submission(entry, proof)
                return wire.encode_submit_reply(session, status)
            if stage == "claim-open":
                j, t, ticket, cred, proof = wire.decode_claim_open_request(params, msg)
                credit = self._srv.claim_open(session, j, t, ticket, cred, proof)
                return wire.encode_claim_open_reply(session, credit)
            if stage == "claim-reveal":
                q, r_q = wire.decode_reveal_request(params, msg)
                self._srv.claim_reveal(session, q, r_q)
                return wire.encode_reveal_reply(stage, session)
            if stage == "claim-refresh":
                cm_q_new = wire.decode_refresh_request(params, msg)
                sig = self._srv.claim_refresh(session, cm_q_new)
                return wire.encode_refresh_reply(stage, session, sig)
            if stage == "inquire-open":
                cred, cm_proof, nn_proof, spaces = wire.decode_inquire_open_request(params, msg)
                statuses = self._srv.inquiry_open(session, cred, cm_proof, nn_proof, spaces)
                return wire.encode_inquire_open_reply(session, statuses)
            if stage == "inquire-reveal":
                q, r_q = wire.decode_reveal_request(params, msg)
                self._srv.inquiry_reveal(session, q, r_q)
                return wire.encode_reveal_reply(stage, session)
            if stage == "inquire-refresh":
                cm_q_new = wire.decode_refresh_request(params, msg)
                sig = self._srv.inquiry_refresh(session, cm_q_new)
                return wire.encode_refresh_reply(stage, session, sig)
            raise WireError("unroutable stage")
        except Rejection as rej:
            return wire.encode_rejected_reply(stage, session, rej.reason)
        except WireError:
            # The frame was sound but the body was not a valid request.
            return wire.encode_rejected_reply(stage, session, REASON_BAD_REQUEST)


class RemoteServer:
    """Client-side proxy with the Server method surface, speaking the wire."""

    def __init__(self, address, bundle: PublicBundle | None = None, timeout: float = 30.0):
        self._address = tuple(address)
        self._timeout = timeout
        self._sock: socket.socket | None = None
        self.metrics = MetricsCollector()
        self._bundle = bundle
        self._params = bundle.params if bundle is not None else None

    # -- plumbing -----------------------------------------------------------

    def _connect(self) -> socket.socket:
        if self._sock is None:
            try:
                self._sock = socket.create_connection(self._address, timeout=self._timeout)
            except OSError as exc:
                raise TransportError("cannot connect to %s:%s" % self._address) from exc
        return self._sock

    def connect(self) -> "RemoteServer":
        """Eagerly open the connection (benchmarks keep setup out of timings)."""
        self._connect()
        return self

    def close(self) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
            self._sock = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _roundtrip(self, msg: WireMessage) -> WireMessage:
        sock = self._connect()
        started = time.perf_counter()
        try:
            sent = wire.send_frame(sock, wire.encode_message(msg))
            frame = wire.recv_frame(sock)
        except (WireError, OSError) as exc:
            self.close()
            raise TransportError("transport failure during %s" % msg.stage) from exc
        if frame is None:
            self.close()
            raise TransportError("server closed the connection during %s" % msg.stage)
        self.metrics.add(msg.stage, started, time.perf_counter(), sent + 4 + len(frame))
        reply = wire.decode_message(frame)
        if reply.stage != msg.stage or reply.session != msg.session:
            self.close()
            raise TransportError("reply does not match the request")
        reason = wire.reply_rejection(reply)
        if reason is not None:
            raise Rejection(msg.stage, reason)
        return reply

    @staticmethod
    def _session() -> str:
        return secrets.token_hex(16)

    def fetch_bundle(self) -> PublicBundle:
        reply = self._roundtrip(wire.encode_setup_request(self._session()))
        self._bundle = wire.decode_setup_reply(reply)
        self._params = self._bundle.params
        return self._bundle

    def _need_params(self):
        if self._params is None:
            self.fetch_bundle()
        return self._params

    # -- Server surface ------------------------------------------------------

    def bundle(self) -> PublicBundle:
        if self._bundle is None:
            self.fetch_bundle()
        return self._bundle

    def register(self, cm_s1, cm_q, rng=None):
        params = self._need_params()
        msg = wire.encode_register_request(params, self._session(), cm_s1, cm_q)
        return wire.decode_register_reply(params, self._roundtrip(msg))

    def handle_submission(self, entry, proof, now=None):
        if now is not None:
            raise ValueError("the time slot is server-authoritative over the wire")
        params = self._need_params()
        msg = wire.encode_submit_request(params, self._session(), entry, proof)
        return wire.decode_submit_reply(self._roundtrip(msg))

    def claim_open(self, nonce, j, t, ticket, cred, proof):
        params = self._need_params()
        msg = wire.encode_claim_open_request(params, nonce, j, t, ticket, cred, proof)
        return wire.decode_claim_open_reply(self._roundtrip(msg))

    def claim_reveal(self, nonce, q, r_q):
        params = self._need_params()
        msg = wire.encode_reveal_request(params, "claim-reveal", nonce, q, r_q)
        return wire.decode_reveal_reply(self._roundtrip(msg))

    def claim_refresh(self, nonce, cm_q_new):
        params = self._need_params()
        msg = wire.encode_refresh_request(params, "claim-refresh", nonce, cm_q_new)
        return wire.decode_refresh_reply(self._roundtrip(msg))

    def inquiry_open(self, nonce, cred, cm_proof, nn_proof, spaces):
        params = self._need_params()
        msg = wire.encode_inquire_open_request(params, nonce, cred, cm_proof, nn_proof, spaces)
        return wire.decode_inquire_open_reply(self._roundtrip(msg))

    def inquiry_reveal(self, nonce, q, r_q):
        params = self._need_params()
        msg = wire.encode_reveal_request(params, "inquire-reveal", nonce, q, r_q)
        return wire.decode_reveal_reply(self._roundtrip(msg))

    def inquiry_refresh(self, nonce, cm_q_new):
        params = self._need_params()
        msg = wire.encode_refresh_request(params, "inquire-refresh", nonce, cm_q_new)
        return wire.decode_refresh_reply(self._roundtrip(msg))
