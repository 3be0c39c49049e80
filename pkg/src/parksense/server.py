"""The crowdsensing server: tables, aggregation, and the five-stage protocol.

State lives in three tables plus an availability map.  T_D holds data
entries keyed by (j, t, ticket), T_C the unclaimed credit records under the
same key, T_Q the spent credential identifiers.  Claims and inquiries run as
short sessions keyed by a client-chosen nonce; the nonce is hashed into every
proof context, so transcripts cannot be replayed across sessions.

All table mutations happen under one lock.  Proof and signature checks are
pure and run outside it.  An optional append-only journal (TD/TC/TQ lines)
makes the tables restart-safe; replay rebuilds availability from the TD lines
and takes the TC lines, not re-aggregation, as the authority on credits.
"""

from __future__ import annotations

import os
import secrets
import threading
import time
from dataclasses import dataclass

from .commitments import Commitment, Opening, combine, commit, shift, verify_opening
from .groups import HASH_NAME, GroupParams, gen_params, pinned_2048
from .proofs import MODE_KNOWN, CmProof, LinkProof, NNProof, prove_cm, verify_cm, verify_link, verify_nn
from .protocol import (
    REASON_BAD_OPENING,
    REASON_BAD_PROOF,
    REASON_BAD_REQUEST,
    REASON_BAD_SIGNATURE,
    REASON_DUPLICATE,
    REASON_IDENTIFIER_SPENT,
    REASON_INSUFFICIENT_BALANCE,
    REASON_NO_CREDIT,
    REASON_OUT_OF_ORDER,
    REASON_STALE_TIME,
    STATUS_AVAILABLE,
    STATUS_OCCUPIED,
    STATUS_UNCONFIRMED,
    CredentialPublic,
    CredentialSecret,
    PublicBundle,
    Rejection,
    claim_context,
    inquiry_cm_context,
    inquiry_nn_context,
    submission_context,
    ticket_mask,
    validate_space_id,
)
from .signatures import ServerKeys, keygen, sign_credential, verify_credential

_NONCE_CHARS = frozenset("0123456789abcdef")
_MAX_INQUIRY_SPACES = 256

_UNSET = object()  # distinguishes "never aggregated" from a None (tie) vote


@dataclass(frozen=True)
class DataEntry:
    """One submitted reading R = (j, t, ticket, a)."""

    j: str
    t: int
    ticket: Commitment
    a: int


@dataclass(frozen=True)
class CreditRecord:
    """An unclaimed credit C = (j, t, ticket, credit); exists only while unclaimed."""

    j: str
    t: int
    ticket: Commitment
    credit: int


@dataclass
class ServerConfig:
    params: GroupParams
    keys: ServerKeys
    b0: int = 0
    c_q: int = 1
    credit_per_entry: int = 1
    epsilon: int = 1
    slot_length: float = 1.0
    nn_bits: int = 32
    session_timeout: float = 300.0
    journal_path: str | None = None

    def validate(self) -> None:
        self.params.validate()
        if self.b0 < 0 or self.c_q < 0 or self.credit_per_entry < 0 or self.epsilon < 0:
            raise ValueError("protocol constants must be non-negative")
        if self.slot_length <= 0 or self.session_timeout <= 0:
            raise ValueError("slot_length and session_timeout must be positive")
        if self.nn_bits < 1 or (1 << self.nn_bits) > self.params.p:
            raise ValueError("nn_bits incompatible with group order")
        if not 0 <= self.b0 < (1 << self.nn_bits):
            raise ValueError("b0 out of range for the proof width")

    @classmethod
    def from_seed(cls, seed: bytes, group_bits: int = 2048, key_bits: int = 2048, **kw) -> "ServerConfig":
        """Deterministic config: same seed, same published bundle.

        group_bits=2048 uses the pinned production group; smaller sizes are
        generated from the seed and exist for tests and demos only.
        """
        import random

        if group_bits == 2048:
            params = pinned_2048()
        else:
            params = gen_params(group_bits, seed)
        keys = keygen(key_bits, random.Random(seed + b"rsa-keys"))
        return cls(params=params, keys=keys, **kw)


@dataclass
class _Session:
    kind: str  # "claim" | "inquire"
    step: str  # "opened" | "revealed"
    cred: CredentialPublic
    created: float
    key: tuple | None = None  # credit key, claims only
    credit: int = 0
    q: int | None = None


def _check_element(c, params: GroupParams) -> bool:
    return isinstance(c, Commitment) and params.is_element(c.element)


def _check_nonce(nonce) -> bool:
    return (
        isinstance(nonce, str)
        and 8 <= len(nonce) <= 64
        and all(ch in _NONCE_CHARS for ch in nonce)
    )


class Server:
    """In-process protocol engine; the wire layer is a thin dispatcher over it."""

    def __init__(self, config: ServerConfig, clock=None):
        config.validate()
        self._cfg = config
        self._params = config.params
        self._clock = clock if clock is not None else time.monotonic
        self._lock = threading.RLock()
        self._entries: dict[tuple[str, int, int], DataEntry] = {}
        self._by_space: dict[str, dict[int, list[DataEntry]]] = {}
        self._tallies: dict[tuple[str, int], list[int]] = {}
        self._credits: dict[tuple[str, int, int], CreditRecord] = {}
        self._claimed: set[tuple[str, int, int]] = set()
        self._spent: set[int] = set()
        self._pending_q: set[int] = set()
        self._availability: dict[tuple[str, int], str] = {}
        self._latest: dict[str, int] = {}
        self._last_vote: dict[tuple[str, int], object] = {}
        self._sessions: dict[str, _Session] = {}
        self._journal = None
        if config.journal_path:
            if os.path.exists(config.journal_path):
                self._replay(config.journal_path)
            self._journal = open(config.journal_path, "a", encoding="ascii", buffering=1)

    # -- setup ------------------------------------------------------------

    def bundle(self) -> PublicBundle:
        return PublicBundle(
            params=self._params,
            server_key=self._cfg.keys.public,
            hash_name=HASH_NAME,
            b0=self._cfg.b0,
            c_q=self._cfg.c_q,
            nn_bits=self._cfg.nn_bits,
            epsilon=self._cfg.epsilon,
            slot_length=self._cfg.slot_length,
        )

    def current_slot(self) -> int:
        return int(time.time() // self._cfg.slot_length)

    def close(self) -> None:
        if self._journal is not None:
            self._journal.close()
            self._journal = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- registration -----------------------------------------------------

    def register(self, cm_s_prime: Commitment, cm_q: Commitment, rng=None) -> tuple[int, bytes]:
        """Jointly derive cm_s = cm_s' * Cm(s'', 0) and sign the fresh credential."""
        if not _check_element(cm_s_prime, self._params) or not _check_element(cm_q, self._params):
            raise Rejection("register", REASON_BAD_REQUEST)
        rng = rng or secrets.SystemRandom()
        s2 = self._params.random_scalar(rng)
        cm_s = combine(cm_s_prime, commit(s2, 0, self._params), self._params)
        cm_b = commit(self._cfg.b0, 0, self._params)
        sig = sign_credential(self._cfg.keys, cm_s, cm_q, cm_b, self._params)
        return s2, sig

    # -- submission and aggregation ----------------------------------------

    def handle_submission(self, entry: DataEntry, proof: CmProof, now: int | None = None) -> str:
        """Accept one reading; returns the (recomputed) status for its slot."""
        if (
            not isinstance(entry, DataEntry)
            or entry.a not in (0, 1)
            or not isinstance(entry.t, int)
            or entry.t < 0
            or not _check_element(entry.ticket, self._params)
        ):
            raise Rejection("submit", REASON_BAD_REQUEST)
        try:
            validate_space_id(entry.j)
        except ValueError:
            raise Rejection("submit", REASON_BAD_REQUEST) from None
        now = self.current_slot() if now is None else now
        if entry.t not in (now, now - 1):
            raise Rejection("submit", REASON_STALE_TIME)
        mask = ticket_mask(entry.j, entry.t, self._params)
        context = submission_context(self._params, entry.j, entry.t, entry.a)
        if not verify_cm(proof, entry.ticket, context, self._params, known_mask=mask):
            raise Rejection("submit", REASON_BAD_PROOF)
        key = (entry.j, entry.t, entry.ticket.element)
        with self._lock:
            if key in self._entries:
                raise Rejection("submit", REASON_DUPLICATE)
            self._insert_entry_locked(entry)
            self._journal_write("TD|%s|%d|%s|%d\n" % (entry.j, entry.t, self._hex(entry.ticket), entry.a))
            self._prune_space_locked(entry.j, now)
            return self._aggregate_locked(entry.j, entry.t, trigger=entry)

    def aggregate(self, j: str, t: int) -> str:
        """Recompute the slot's status; idempotent, safe to call periodically."""
        with self._lock:
            return self._aggregate_locked(j, t)

    def ingest_iot_reading(
        self, j: str, t: int, a: int, sensor: CredentialSecret, now: int | None = None, rng=None
    ) -> str:
        """Sensors are ordinary users: build the ticket and proof, then submit."""
        mask = ticket_mask(j, t, self._params)
        ticket = commit(sensor.s, mask, self._params)
        proof = prove_cm(
            Opening(sensor.s, mask),
            ticket,
            submission_context(self._params, j, t, a),
            self._params,
            rng=rng,
            mode=MODE_KNOWN,
        )
        return self.handle_submission(DataEntry(j, t, ticket, a), proof, now=now)

    def _insert_entry_locked(self, entry: DataEntry) -> None:
        key = (entry.j, entry.t, entry.ticket.element)
        self._entries[key] = entry
        self._by_space.setdefault(entry.j, {}).setdefault(entry.t, []).append(entry)
        tally = self._tallies.setdefault((entry.j, entry.t), [0, 0])
        tally[entry.a] += 1

    def _window(self, j: str, t: int):
        eps = self._cfg.epsilon
        return range(max(t - eps, 0), t + eps + 1)

    def _vote_locked(self, j: str, t: int):
        n0 = n1 = 0
        for t2 in self._window(j, t):
            tally = self._tallies.get((j, t2))
            if tally is not None:
                n0 += tally[0]
                n1 += tally[1]
        if n1 > n0:
            return 1
        if n0 > n1:
            return 0
        return None

    def _aggregate_locked(self, j: str, t: int, trigger: DataEntry | None = None) -> str:
        v = self._vote_locked(j, t)
        status = {1: STATUS_AVAILABLE, 0: STATUS_OCCUPIED, None: STATUS_UNCONFIRMED}[v]
        self._availability[(j, t)] = status
        if self._latest.get(j, -1) < t:
            self._latest[j] = t
        prev = self._last_vote.get((j, t), _UNSET)
        self._last_vote[(j, t)] = v
        if prev is _UNSET or prev != v:
            # Vote is new or flipped: re-judge every in-window entry.
            slots = self._by_space.get(j, {})
            for t2 in self._window(j, t):
                for entry in slots.get(t2, ()):
                    self._mark_locked(entry, v)
        elif trigger is not None:
            self._mark_locked(trigger, v)
        return status

    def _mark_locked(self, entry: DataEntry, v) -> None:
        """Keyed insert/remove of the entry's CreditRecord per the vote v."""
        key = (entry.j, entry.t, entry.ticket.element)
        if v is not None and entry.a == v:
            if key not in self._credits and key not in self._claimed:
                record = CreditRecord(entry.j, entry.t, entry.ticket, self._cfg.credit_per_entry)
                self._credits[key] = record
                self._journal_write(
                    "TC|%s|%d|%s|%d\n" % (entry.j, entry.t, self._hex(entry.ticket), record.credit)
                )
        else:
            record = self._credits.pop(key, None)
            if record is not None:
                # Revocation: the vote moved away before the credit was claimed.
                self._journal_write("TC|%s|%d|%s|0\n" % (entry.j, entry.t, self._hex(entry.ticket)))

    def _prune_space_locked(self, j: str, now: int) -> None:
        """Retention: keep a sliding window of 2*epsilon + 2 slots per space."""
        horizon = now - (2 * self._cfg.epsilon + 1)
        slots = self._by_space.get(j)
        if not slots:
            return
        for t in [t for t in slots if t < horizon]:
            for entry in slots.pop(t):
                self._entries.pop((j, t, entry.ticket.element), None)
            self._tallies.pop((j, t), None)
            self._availability.pop((j, t), None)
            self._last_vote.pop((j, t), None)

    # -- claims -------------------------------------------------------------

    def claim_open(
        self, nonce: str, j: str, t: int, ticket: Commitment, cred: CredentialPublic, proof: LinkProof
    ) -> int:
        stage = "claim-open"
        if (
            not _check_nonce(nonce)
            or not isinstance(t, int)
            or t < 0
            or not _check_element(ticket, self._params)
            or not self._check_cred(cred)
        ):
            raise Rejection(stage, REASON_BAD_REQUEST)
        try:
            validate_space_id(j)
        except ValueError:
            raise Rejection(stage, REASON_BAD_REQUEST) from None
        if not verify_credential(
            self._cfg.keys.public, cred.cm_s, cred.cm_q, cred.cm_b, cred.sig, self._params
        ):
            raise Rejection(stage, REASON_BAD_SIGNATURE)
        mask = ticket_mask(j, t, self._params)
        context = claim_context(self._params, j, t, nonce)
        if not verify_link(proof, cred.cm_s, ticket, mask, context, self._params):
            raise Rejection(stage, REASON_BAD_PROOF)
        with self._lock:
            self._sweep_locked()
            if nonce in self._sessions:
                raise Rejection(stage, REASON_OUT_OF_ORDER)
            key = (j, t, ticket.element)
            record = self._credits.get(key)
            if record is None:
                raise Rejection(stage, REASON_NO_CREDIT)
            self._sessions[nonce] = _Session(
                kind="claim", step="opened", cred=cred, created=self._clock(), key=key, credit=record.credit
            )
            return record.credit

    def claim_reveal(self, nonce: str, q: int, r_q: int) -> None:
        self._reveal("claim-reveal", "claim", nonce, q, r_q)

    def claim_refresh(self, nonce: str, cm_q_new: Commitment) -> bytes:
        stage = "claim-refresh"
        if not _check_nonce(nonce) or not _check_element(cm_q_new, self._params):
            raise Rejection(stage, REASON_BAD_REQUEST)
        with self._lock:
            self._sweep_locked()
            sess = self._sessions.get(nonce)
            if sess is None or sess.kind != "claim" or sess.step != "revealed":
                raise Rejection(stage, REASON_OUT_OF_ORDER)
            record = self._credits.get(sess.key)
            if record is None:
                # Revoked while the session was open; the revealed q burns.
                self._burn_locked(sess.q)
                del self._sessions[nonce]
                raise Rejection(stage, REASON_NO_CREDIT)
            cm_b_new = shift(sess.cred.cm_b, record.credit, self._params)
            sig = sign_credential(self._cfg.keys, sess.cred.cm_s, cm_q_new, cm_b_new, self._params)
            # Atomic: spend q, delete the record, hand over the signature.
            self._spent.add(sess.q)
            self._pending_q.discard(sess.q)
            del self._credits[sess.key]
            self._claimed.add(sess.key)
            self._journal_write(
                "TQ|%s\nTC|%s|%d|%s|0\n"
                % (self._qhex(sess.q), record.j, record.t, self._hex(record.ticket))
            )
            del self._sessions[nonce]
            return sig

    # -- inquiries -----------------------------------------------------------

    def inquiry_open(
        self,
        nonce: str,
        cred: CredentialPublic,
        cm_proof: CmProof,
        nn_proof: NNProof,
        spaces: list[str],
    ) -> list[str]:
        stage = "inquire-open"
        if (
            not _check_nonce(nonce)
            or not self._check_cred(cred)
            or not isinstance(spaces, list)
            or not 1 <= len(spaces) <= _MAX_INQUIRY_SPACES
        ):
            raise Rejection(stage, REASON_BAD_REQUEST)
        try:
            for j in spaces:
                validate_space_id(j)
        except ValueError:
            raise Rejection(stage, REASON_BAD_REQUEST) from None
        if not verify_credential(
            self._cfg.keys.public, cred.cm_s, cred.cm_q, cred.cm_b, cred.sig, self._params
        ):
            raise Rejection(stage, REASON_BAD_SIGNATURE)
        if not verify_cm(cm_proof, cred.cm_s, inquiry_cm_context(self._params, nonce), self._params):
            raise Rejection(stage, REASON_BAD_PROOF)
        target = shift(cred.cm_b, -self._cfg.c_q, self._params)
        if not verify_nn(
            nn_proof, target, self._cfg.nn_bits, inquiry_nn_context(self._params, nonce), self._params
        ):
            raise Rejection(stage, REASON_INSUFFICIENT_BALANCE)
        with self._lock:
            self._sweep_locked()
            if nonce in self._sessions:
                raise Rejection(stage, REASON_OUT_OF_ORDER)
            self._sessions[nonce] = _Session(
                kind="inquire", step="opened", cred=cred, created=self._clock()
            )
            return [self._status_locked(j) for j in spaces]

    def inquiry_reveal(self, nonce: str, q: int, r_q: int) -> None:
        self._reveal("inquire-reveal", "inquire", nonce, q, r_q)

    def inquiry_refresh(self, nonce: str, cm_q_new: Commitment) -> bytes:
        stage = "inquire-refresh"
        if not _check_nonce(nonce) or not _check_element(cm_q_new, self._params):
            raise Rejection(stage, REASON_BAD_REQUEST)
        with self._lock:
            self._sweep_locked()
            sess = self._sessions.get(nonce)
            if sess is None or sess.kind != "inquire" or sess.step != "revealed":
                raise Rejection(stage, REASON_OUT_OF_ORDER)
            cm_b_new = shift(sess.cred.cm_b, -self._cfg.c_q, self._params)
            sig = sign_credential(self._cfg.keys, sess.cred.cm_s, cm_q_new, cm_b_new, self._params)
            self._spent.add(sess.q)
            self._pending_q.discard(sess.q)
            self._journal_write("TQ|%s\n" % self._qhex(sess.q))
            del self._sessions[nonce]
            return sig

    def availability(self, spaces: list[str]) -> list[str]:
        """Unauthenticated view of the latest statuses; tests and ops use it."""
        with self._lock:
            return [self._status_locked(j) for j in spaces]

    # -- session plumbing ------------------------------------------------------

    def _reveal(self, stage: str, kind: str, nonce: str, q, r_q) -> None:
        p = self._params.p
        scalars_ok = (
            isinstance(q, int) and isinstance(r_q, int) and 0 <= q < p and 0 <= r_q < p
        )
        if not _check_nonce(nonce) or not scalars_ok:
            raise Rejection(stage, REASON_BAD_REQUEST)
        with self._lock:
            self._sweep_locked()
            sess = self._sessions.get(nonce)
            if sess is None or sess.kind != kind or sess.step != "opened":
                raise Rejection(stage, REASON_OUT_OF_ORDER)
            if not verify_opening(sess.cred.cm_q, Opening(q, r_q), self._params):
                del self._sessions[nonce]
                raise Rejection(stage, REASON_BAD_OPENING)
            if q in self._spent or q in self._pending_q:
                del self._sessions[nonce]
                raise Rejection(stage, REASON_IDENTIFIER_SPENT)
            self._pending_q.add(q)
            sess.q = q
            sess.step = "revealed"

    def _sweep_locked(self) -> None:
        now = self._clock()
        expired = [n for n, s in self._sessions.items() if now - s.created > self._cfg.session_timeout]
        for nonce in expired:
            sess = self._sessions.pop(nonce)
            if sess.q is not None:
                # Abandoned after reveal: the identifier burns.
                self._burn_locked(sess.q)

    def _burn_locked(self, q: int) -> None:
        self._pending_q.discard(q)
        if q not in self._spent:
            self._spent.add(q)
            self._journal_write("TQ|%s\n" % self._qhex(q))

    def _status_locked(self, j: str) -> str:
        t = self._latest.get(j)
        if t is None:
            return STATUS_UNCONFIRMED
        return self._availability.get((j, t), STATUS_UNCONFIRMED)

    def _check_cred(self, cred) -> bool:
        return (
            isinstance(cred, CredentialPublic)
            and _check_element(cred.cm_s, self._params)
            and _check_element(cred.cm_q, self._params)
            and _check_element(cred.cm_b, self._params)
            and isinstance(cred.sig, bytes)
        )

    # -- journal ---------------------------------------------------------------

    def _hex(self, c: Commitment) -> str:
        return self._params.encode_element(c.element).hex()

    def _qhex(self, q: int) -> str:
        return self._params.encode_scalar(q).hex()

    def _journal_write(self, text: str) -> None:
        if self._journal is not None:
            self._journal.write(text)

    def _replay(self, path: str) -> None:
        params = self._params
        with open(path, "r", encoding="ascii") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                parts = line.split("|")
                try:
                    if parts[0] == "TD" and len(parts) == 5:
                        j, t, a = parts[1], int(parts[2]), int(parts[4])
                        ticket = Commitment(params.decode_element(bytes.fromhex(parts[3])))
                        if a not in (0, 1):
                            raise ValueError("bad availability bit")
                        self._insert_entry_locked(DataEntry(j, t, ticket, a))
                    elif parts[0] == "TC" and len(parts) == 5:
                        j, t, credit = parts[1], int(parts[2]), int(parts[4])
                        ticket = Commitment(params.decode_element(bytes.fromhex(parts[3])))
                        key = (j, t, ticket.element)
                        if credit > 0:
                            self._credits[key] = CreditRecord(j, t, ticket, credit)
                        else:
                            # Removal line: claimed or revoked.  Replay cannot
                            # tell them apart, so it conservatively blocks
                            # re-crediting; a restart never double-pays.
                            self._credits.pop(key, None)
                            self._claimed.add(key)
                    elif parts[0] == "TQ" and len(parts) == 2:
                        self._spent.add(params.decode_scalar(bytes.fromhex(parts[1])))
                    else:
                        raise ValueError("unknown tag")
                except (ValueError, IndexError) as exc:
                    raise ValueError("corrupt journal line %d: %s" % (lineno, line)) from exc
        for (j, t) in sorted(self._tallies):
            v = self._vote_locked(j, t)
            self._availability[(j, t)] = {
                1: STATUS_AVAILABLE,
                0: STATUS_OCCUPIED,
                None: STATUS_UNCONFIRMED,
            }[v]
            self._last_vote[(j, t)] = v
            if self._latest.get(j, -1) < t:
                self._latest[j] = t

    # -- introspection for tests and ops ----------------------------------------

    def snapshot(self) -> dict:
        """A plain-data copy of the persistent tables (no sessions)."""
        with self._lock:
            return {
                "entries": sorted(
                    (e.j, e.t, self._hex(e.ticket), e.a) for e in self._entries.values()
                ),
                "credits": sorted(
                    (c.j, c.t, self._hex(c.ticket), c.credit) for c in self._credits.values()
                ),
                "spent": sorted(self._qhex(q) for q in self._spent),
                "availability": sorted(
                    (j, t, status) for (j, t), status in self._availability.items()
                ),
            }

    @property
    def config(self) -> ServerConfig:
        return self._cfg
