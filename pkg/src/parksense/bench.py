"""Evaluation harness: per-stage cost, confirmation-time scaling, kernels.

Three benchmarks, all over the real wire protocol on loopback:

* stages: R repetitions of register -> submit -> claim -> inquire, reporting
  mean per-stage wall time and framed bytes for both roles.
* confirm: U simulated users submit simultaneously, for one shared space and
  for U distinct spaces.  The reported figure is the server confirmation
  makespan: wall time from the first request reaching the server to the last
  reply leaving it.  Measuring at the server excludes client thread
  scheduling and connection jitter, which at small U would drown the real
  difference between the variants; rep counts scale up as U shrinks for the
  same reason.  Trimmed means over paired, order-alternated reps.
* backends: the compiled and pure-Python kernels head to head.

Machine-readable output: one line per measurement, `metric,stage,role,value,unit`.
"""

from __future__ import annotations

import random
import statistics
import threading
import time
from dataclasses import dataclass

from .backend import available_backends
from .client import Client
from .commitments import Opening, commit
from .netio import ProtocolServer, RemoteServer
from .proofs import MODE_KNOWN, prove_cm
from .protocol import STATUS_AVAILABLE, submission_context, ticket_mask
from .server import DataEntry, Server, ServerConfig

USER_COUNTS = (1, 5, 10, 15, 30, 50)

_STAGE_MAP = {
    "setup": ("setup",),
    "registration": ("register",),
    "submission": ("submit",),
    "claim": ("claim-open", "claim-reveal", "claim-refresh"),
    "inquiry": ("inquire-open", "inquire-reveal", "inquire-refresh"),
}


@dataclass(frozen=True)
class StageMetrics:
    """Mean per-invocation cost of one protocol stage, both roles."""

    stage: str
    user_time_s: float
    server_time_s: float
    user_bytes: int
    server_bytes: int


@dataclass(frozen=True)
class Row:
    metric: str
    stage: str
    role: str
    value: float
    unit: str

    def format(self) -> str:
        return "%s,%s,%s,%.6g,%s" % (self.metric, self.stage, self.role, self.value, self.unit)


def _bench_config(seed: bytes = b"parksense-bench") -> ServerConfig:
    """Small parameters so the harness itself is quick; the CLI passes real ones."""
    return ServerConfig.from_seed(
        seed, group_bits=64, key_bits=512, nn_bits=8, epsilon=1, slot_length=1e6
    )


# -- per-stage bench -------------------------------------------------------------


def run_stage_bench(config: ServerConfig | None = None, reps: int = 5, seed: int = 1):
    """Mean StageMetrics over R full protocol rounds; returns (metrics, rows)."""
    if reps < 1:
        raise ValueError("reps must be positive")
    config = config or _bench_config()
    rng = random.Random(seed)
    user_times: dict[str, list[float]] = {name: [] for name in _STAGE_MAP}
    with Server(config) as srv, ProtocolServer(srv) as ps:
        client_metrics = []
        for rep in range(reps):
            remote = RemoteServer(ps.address).connect()
            clock = time.perf_counter
            t0 = clock()
            bundle = remote.fetch_bundle()
            user_times["setup"].append(clock() - t0)

            client = Client(bundle, rng=random.Random(rng.getrandbits(64)))
            t0 = clock()
            client.register_with(remote)
            user_times["registration"].append(clock() - t0)

            j = "bench-%05d" % rep
            t = srv.current_slot()
            t0 = clock()
            client.submit_to(remote, j, t, 1)
            user_times["submission"].append(clock() - t0)

            t0 = clock()
            client.run_claim(remote, j, t)
            user_times["claim"].append(clock() - t0)

            t0 = clock()
            client.run_inquiry(remote, [j])
            user_times["inquiry"].append(clock() - t0)

            client_metrics.append(remote.metrics.snapshot())
            remote.close()
        server_snapshot = ps.metrics.snapshot()

    metrics = []
    for name, wire_stages in _STAGE_MAP.items():
        server_time = sum(
            server_snapshot[w].time_s / server_snapshot[w].calls for w in wire_stages
        )
        server_bytes = sum(
            server_snapshot[w].bytes_total / server_snapshot[w].calls for w in wire_stages
        )
        user_bytes = 0.0
        for w in wire_stages:
            counters = [m[w] for m in client_metrics]
            user_bytes += sum(c.bytes_total for c in counters) / sum(c.calls for c in counters)
        metrics.append(
            StageMetrics(
                stage=name,
                user_time_s=statistics.mean(user_times[name]),
                server_time_s=server_time,
                user_bytes=round(user_bytes),
                server_bytes=round(server_bytes),
            )
        )
    rows = []
    for m in metrics:
        rows.append(Row("time", m.stage, "user", m.user_time_s, "s"))
        rows.append(Row("time", m.stage, "server", m.server_time_s, "s"))
        rows.append(Row("bytes", m.stage, "user", m.user_bytes, "B"))
        rows.append(Row("bytes", m.stage, "server", m.server_bytes, "B"))
    return metrics, rows


# -- confirmation-time bench ---------------------------------------------------------


def _reps_for(u: int, budget: int) -> int:
    reps = max(9, -(-budget // u))
    return reps if reps % 2 else reps + 1


def _trimmed_mean(samples, trim: float = 0.2) -> float:
    """Mean of the central 1-2*trim mass; spike-robust but still averaging,
    which is what lets small per-trial differences accumulate across reps."""
    ordered = sorted(samples)
    drop = int(len(ordered) * trim)
    kept = ordered[drop : len(ordered) - drop] if drop else ordered
    return statistics.mean(kept)


def _build_submissions(params, j_of, t, count, rng):
    payloads = []
    for u in range(count):
        s = params.random_scalar(rng)
        j = j_of(u)
        mask = ticket_mask(j, t, params)
        ticket = commit(s, mask, params)
        proof = prove_cm(
            Opening(s, mask),
            ticket,
            submission_context(params, j, t, 1),
            params,
            rng=rng,
            mode=MODE_KNOWN,
        )
        payloads.append((DataEntry(j, t, ticket, 1), proof))
    return payloads


def _confirm_trial(srv: Server, ps: ProtocolServer, payloads) -> tuple[float, float]:
    """One burst; returns (server confirmation time, user makespan) in seconds.

    Server confirmation time is the handling time the server spends on the
    batch: the summed per-request processing durations plus the availability
    refresh that re-judges every touched space.  Confirming U distinct spaces
    genuinely costs U refresh passes against one for the shared space, and the
    sum is immune to the thread-scheduling jitter that dominates wall-clock
    spans at small U.  The user value stays a wall-clock makespan.
    """
    remotes = [RemoteServer(ps.address).connect() for _ in payloads]
    for r in remotes:
        r._params = ps._params
    touched = sorted({(entry.j, entry.t) for entry, _proof in payloads})
    barrier = threading.Barrier(len(payloads) + 1)
    statuses = []

    def worker(remote, entry, proof):
        barrier.wait()
        statuses.append(remote.handle_submission(entry, proof))

    threads = [
        threading.Thread(target=worker, args=(r, e, p))
        for r, (e, p) in zip(remotes, payloads)
    ]
    for th in threads:
        th.start()
    ps.metrics.reset()
    barrier.wait()
    started = time.perf_counter()
    for th in threads:
        th.join()
    user_span = time.perf_counter() - started
    for r in remotes:
        r.close()
    sweep_start = time.thread_time()
    for j, t in touched:
        srv.aggregate(j, t)
    sweep = time.thread_time() - sweep_start
    counter = ps.metrics.snapshot().get("submit")
    if counter is None or counter.calls != len(payloads):
        raise RuntimeError("confirm trial lost submissions")
    if any(s != STATUS_AVAILABLE for s in statuses):
        raise RuntimeError("confirm trial had rejected or unconfirmed submissions")
    return counter.time_s + sweep, user_span + sweep


def run_confirm_bench(
    config: ServerConfig | None = None,
    user_counts=USER_COUNTS,
    rep_budget: int = 900,
    seed: int = 1,
):
    """Confirmation-time scaling; returns a result dict (see keys below)."""
    config = config or _bench_config()
    rng = random.Random(seed)
    params = config.params
    trial = 0
    result = {
        "user_counts": list(user_counts),
        "same": {},
        "distinct": {},
        "same_user": {},
        "distinct_user": {},
    }
    with Server(config) as srv, ProtocolServer(srv) as ps:
        t = srv.current_slot()
        shared = "confirm-same"
        # Warm the shared space so the same-space variant measures the steady
        # state; distinct spaces are cold by design, that is the difference
        # under test.
        for entry, proof in _build_submissions(params, lambda u: shared, t, 1, rng):
            srv.handle_submission(entry, proof)

        def one(variant: str, u: int) -> tuple[float, float]:
            nonlocal trial
            trial += 1
            if variant == "same":
                j_of = lambda _u: shared
            else:
                stamp = trial
                j_of = lambda _u: "confirm-d%05d-%03d" % (stamp, _u)
            payloads = _build_submissions(params, j_of, t, u, rng)
            return _confirm_trial(srv, ps, payloads)

        for u in user_counts:
            reps = _reps_for(u, rep_budget)
            same_s, dist_s, same_u, dist_u = [], [], [], []
            for rep in range(reps):
                order = ("same", "distinct") if rep % 2 == 0 else ("distinct", "same")
                for variant in order:
                    server_span, user_span = one(variant, u)
                    if variant == "same":
                        same_s.append(server_span)
                        same_u.append(user_span)
                    else:
                        dist_s.append(server_span)
                        dist_u.append(user_span)
            result["same"][u] = _trimmed_mean(same_s)
            result["distinct"][u] = _trimmed_mean(dist_s)
            result["same_user"][u] = _trimmed_mean(same_u)
            result["distinct_user"][u] = _trimmed_mean(dist_u)

    xs = list(user_counts)
    rows = []
    for variant in ("same", "distinct"):
        ys = [result[variant][u] for u in xs]
        slope, intercept = statistics.linear_regression(xs, ys)
        r2 = statistics.correlation(xs, ys) ** 2
        result[variant + "_slope"] = slope
        result[variant + "_intercept"] = intercept
        result[variant + "_r2"] = r2
        for u in xs:
            rows.append(Row("confirm", "%s-%02d" % (variant, u), "server", result[variant][u], "s"))
            rows.append(
                Row("confirm", "%s-%02d" % (variant, u), "user", result[variant + "_user"][u], "s")
            )
        rows.append(Row("fit", "confirm-" + variant, "slope", slope, "s/user"))
        rows.append(Row("fit", "confirm-" + variant, "r2", r2, "1"))
    result["rows"] = rows
    return result


# -- backend bench ----------------------------------------------------------------


def run_backend_bench(reps: int = 200, seed: int = 1):
    """Compiled kernels vs the pure fallback on the hot operations."""
    from . import _purekernels
    from .groups import pinned_2048

    kernels = {"pure": _purekernels}
    if "native" in available_backends():
        from . import _kernels

        kernels["native"] = _kernels
    params = pinned_2048()
    rng = random.Random(seed)
    exps = [rng.randrange(1, params.p) for _ in range(reps)]
    base = params.g
    pixels = bytes(rng.randrange(256) for _ in range(128 * 128))

    timings: dict[tuple[str, str], float] = {}
    for name, mod in kernels.items():
        t0 = time.perf_counter()
        for e in exps:
            mod.powmod(base, e, params.q)
        timings[(name, "powmod-2048")] = (time.perf_counter() - t0) / reps
        t0 = time.perf_counter()
        for _ in range(10):
            mod.is_probable_prime(params.q)
        timings[(name, "primality-2048")] = (time.perf_counter() - t0) / 10
        t0 = time.perf_counter()
        for _ in range(10):
            mod.edge_sharp_total(pixels, 128, 128)
        timings[(name, "edge-sharpness-128px")] = (time.perf_counter() - t0) / 10

    rows = []
    for (name, op), seconds in sorted(timings.items()):
        rows.append(Row("time", op, name, seconds, "s"))
    if "native" in kernels:
        for op in ("powmod-2048", "primality-2048", "edge-sharpness-128px"):
            speedup = timings[("pure", op)] / timings[("native", op)]
            rows.append(Row("speedup", op, "native-over-pure", speedup, "x"))
    return rows
