"""The user agent: credential lifecycle, proofs, and the client half of each stage.

A Client drives sessions against anything that implements the Server method
surface (the in-process Server or a RemoteServer wire proxy).  It is
single-session: one claim or inquiry in flight at a time, while submissions
are stateless one-shots and may run concurrently.

The credential invariants the agent maintains: r_s and r_b never change
(the server only ever multiplies the signed commitments by zero-mask
factors), q and r_q are replaced on every completed claim or inquiry, and
the secret opening always matches the public triple under the current
signature.  A session aborted before the q-reveal leaves all of it untouched.
"""

from __future__ import annotations

import os
import secrets
import threading
import time
from dataclasses import dataclass, replace

from .commitments import Commitment, Opening, combine, commit, shift
from .groups import GroupParams
from .proofs import MODE_KNOWN, CmProof, prove_cm, prove_link, prove_nn
from .protocol import (
    REASON_INSUFFICIENT_BALANCE,
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
from .server import DataEntry
from .signatures import verify_credential


class ClientError(Exception):
    """Local misuse or a server reply that fails client-side verification."""


@dataclass(frozen=True)
class PendingTicket:
    j: str
    t: int
    ticket: Commitment
    a: int


class Client:
    def __init__(self, bundle: PublicBundle, rng=None):
        bundle.validate()
        self._bundle = bundle
        self._params: GroupParams = bundle.params
        self._rng = rng or secrets.SystemRandom()
        self._lock = threading.Lock()
        self._secret: CredentialSecret | None = None
        self._public: CredentialPublic | None = None
        self._pending: dict[tuple[str, int], PendingTicket] = {}
        self._reg: dict | None = None
        self._in_session = False

    # -- registration ----------------------------------------------------

    def begin_registration(self) -> tuple[Commitment, Commitment]:
        """Fresh (s', q) with masks; returns the commitments to send."""
        p = self._params
        s1 = p.random_scalar(self._rng)
        r_s = p.random_scalar(self._rng)
        q = p.random_scalar(self._rng)
        r_q = p.random_scalar(self._rng)
        cm_s1 = commit(s1, r_s, p)
        cm_q = commit(q, r_q, p)
        self._reg = {"s1": s1, "r_s": r_s, "q": q, "r_q": r_q, "cm_s1": cm_s1, "cm_q": cm_q}
        return cm_s1, cm_q

    def finish_registration(self, s2: int, sig: bytes) -> None:
        """s = s' + s''; recompute cm_s locally and verify before accepting."""
        if self._reg is None:
            raise ClientError("no registration in progress")
        p = self._params
        if not isinstance(s2, int) or not 0 <= s2 < p.p:
            raise ClientError("malformed s'' from server")
        reg = self._reg
        s = p.scalar_add(reg["s1"], s2)
        cm_s = combine(reg["cm_s1"], commit(s2, 0, p), p)
        cm_b = commit(self._bundle.b0, 0, p)
        if not verify_credential(self._bundle.server_key, cm_s, reg["cm_q"], cm_b, sig, p):
            raise ClientError("server signature does not cover the assembled credential")
        self._secret = CredentialSecret(
            s=s, q=reg["q"], b=self._bundle.b0, r_s=reg["r_s"], r_q=reg["r_q"], r_b=0
        )
        self._public = CredentialPublic(cm_s=cm_s, cm_q=reg["cm_q"], cm_b=cm_b, sig=sig)
        self._reg = None

    def register_with(self, server) -> None:
        cm_s1, cm_q = self.begin_registration()
        s2, sig = server.register(cm_s1, cm_q)
        self.finish_registration(s2, sig)

    @property
    def registered(self) -> bool:
        return self._secret is not None

    @property
    def balance(self) -> int:
        self._require_credential()
        return self._secret.b

    @property
    def credential_public(self) -> CredentialPublic:
        self._require_credential()
        return self._public

    @property
    def credential_secret(self) -> CredentialSecret:
        self._require_credential()
        return self._secret

    def pending_tickets(self) -> list[PendingTicket]:
        with self._lock:
            return sorted(self._pending.values(), key=lambda pt: (pt.j, pt.t))

    def current_slot(self) -> int:
        return int(time.time() // self._bundle.slot_length)

    # -- submission --------------------------------------------------------

    def make_submission(self, j: str, t: int, a: int) -> tuple[DataEntry, CmProof]:
        self._require_credential()
        validate_space_id(j)
        if a not in (0, 1):
            raise ValueError("availability bit must be 0 or 1")
        if not isinstance(t, int) or t < 0:
            raise ValueError("bad time slot")
        p = self._params
        mask = ticket_mask(j, t, p)
        ticket = commit(self._secret.s, mask, p)
        proof = prove_cm(
            Opening(self._secret.s, mask),
            ticket,
            submission_context(p, j, t, a),
            p,
            rng=self._rng,
            mode=MODE_KNOWN,
        )
        with self._lock:
            self._pending[(j, t)] = PendingTicket(j, t, ticket, a)
            self._prune_pending_locked(t)
        return DataEntry(j, t, ticket, a), proof

    def submit_to(self, server, j: str, t: int, a: int, now: int | None = None) -> str:
        entry, proof = self.make_submission(j, t, a)
        return server.handle_submission(entry, proof, now=now)

    def _prune_pending_locked(self, t: int) -> None:
        horizon = t - (2 * self._bundle.epsilon + 1)
        for key in [k for k in self._pending if k[1] < horizon]:
            del self._pending[key]

    # -- claim --------------------------------------------------------------

    def run_claim(self, server, j: str, t: int) -> int:
        """Three-step claim for the pending ticket at (j, t); returns the credit."""
        self._require_credential()
        with self._lock:
            pending = self._pending.get((j, t))
        if pending is None:
            raise ClientError("no pending ticket for (%s, %d)" % (j, t))
        self._enter_session()
        try:
            p = self._params
            nonce = self._nonce()
            proof = prove_link(
                Opening(self._secret.s, self._secret.r_s),
                self._public.cm_s,
                pending.ticket,
                ticket_mask(j, t, p),
                claim_context(p, j, t, nonce),
                p,
                rng=self._rng,
            )
            credit = server.claim_open(nonce, j, t, pending.ticket, self._public, proof)
            server.claim_reveal(nonce, self._secret.q, self._secret.r_q)
            q_new, r_q_new, cm_q_new = self._fresh_q()
            sig = server.claim_refresh(nonce, cm_q_new)
            cm_b_new = shift(self._public.cm_b, credit, p)
            self._install(cm_q_new, cm_b_new, sig, q_new, r_q_new, self._secret.b + credit)
            with self._lock:
                self._pending.pop((j, t), None)
            return credit
        finally:
            self._leave_session()

    # -- inquiry -------------------------------------------------------------

    def run_inquiry(self, server, spaces: list[str]) -> list[str]:
        """Inquiry for the given spaces; costs c_q, refused locally if b < c_q."""
        self._require_credential()
        for j in spaces:
            validate_space_id(j)
        c_q = self._bundle.c_q
        if self._secret.b < c_q:
            # The paper's prover simply cannot build nzkpNN for a negative
            # value, so refuse before any network traffic.
            raise Rejection("inquire-open", REASON_INSUFFICIENT_BALANCE)
        self._enter_session()
        try:
            p = self._params
            nonce = self._nonce()
            cm_proof = prove_cm(
                Opening(self._secret.s, self._secret.r_s),
                self._public.cm_s,
                inquiry_cm_context(p, nonce),
                p,
                rng=self._rng,
            )
            target = shift(self._public.cm_b, -c_q, p)
            nn_proof = prove_nn(
                Opening(self._secret.b - c_q, self._secret.r_b),
                target,
                self._bundle.nn_bits,
                inquiry_nn_context(p, nonce),
                p,
                rng=self._rng,
            )
            statuses = server.inquiry_open(nonce, self._public, cm_proof, nn_proof, list(spaces))
            server.inquiry_reveal(nonce, self._secret.q, self._secret.r_q)
            q_new, r_q_new, cm_q_new = self._fresh_q()
            sig = server.inquiry_refresh(nonce, cm_q_new)
            cm_b_new = shift(self._public.cm_b, -c_q, p)
            self._install(cm_q_new, cm_b_new, sig, q_new, r_q_new, self._secret.b - c_q)
            return statuses
        finally:
            self._leave_session()

    # -- internals ------------------------------------------------------------

    def _require_credential(self) -> None:
        if self._secret is None:
            raise ClientError("client is not registered")

    def _enter_session(self) -> None:
        with self._lock:
            if self._in_session:
                raise ClientError("another session is already in flight")
            self._in_session = True

    def _leave_session(self) -> None:
        with self._lock:
            self._in_session = False

    def _nonce(self) -> str:
        return "%032x" % self._rng.getrandbits(128)

    def _fresh_q(self) -> tuple[int, int, Commitment]:
        p = self._params
        q = p.random_scalar(self._rng)
        r_q = p.random_scalar(self._rng)
        return q, r_q, commit(q, r_q, p)

    def _install(self, cm_q, cm_b, sig: bytes, q: int, r_q: int, b: int) -> None:
        """Adopt the refreshed credential only after the signature checks out."""
        p = self._params
        if not verify_credential(self._bundle.server_key, self._public.cm_s, cm_q, cm_b, sig, p):
            raise ClientError("server returned an invalid refresh signature")
        self._secret = replace(self._secret, q=q, r_q=r_q, b=b)
        self._public = CredentialPublic(cm_s=self._public.cm_s, cm_q=cm_q, cm_b=cm_b, sig=sig)

    # -- persistence -------------------------------------------------------------

    def save(self, path: str) -> None:
        """Tagged-line state file, written atomically; secrets stay local."""
        self._require_credential()
        p = self._params
        sec, pub = self._secret, self._public
        lines = [
            "PS|1|%s" % p.fingerprint(),
            "SEC|%s|%s|%d|%s|%s|%s"
            % (
                p.encode_scalar(sec.s).hex(),
                p.encode_scalar(sec.q).hex(),
                sec.b,
                p.encode_scalar(sec.r_s).hex(),
                p.encode_scalar(sec.r_q).hex(),
                p.encode_scalar(sec.r_b).hex(),
            ),
            "PUB|%s|%s|%s|%s"
            % (
                p.encode_element(pub.cm_s.element).hex(),
                p.encode_element(pub.cm_q.element).hex(),
                p.encode_element(pub.cm_b.element).hex(),
                pub.sig.hex(),
            ),
        ]
        with self._lock:
            for pt in sorted(self._pending.values(), key=lambda v: (v.j, v.t)):
                lines.append(
                    "PT|%s|%d|%s|%d" % (pt.j, pt.t, p.encode_element(pt.ticket.element).hex(), pt.a)
                )
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: str, bundle: PublicBundle, rng=None) -> "Client":
        client = cls(bundle, rng=rng)
        p = bundle.params
        sec = pub = None
        pending: dict[tuple[str, int], PendingTicket] = {}
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.rstrip("\n")
                if not line:
                    continue
                parts = line.split("|")
                try:
                    if parts[0] == "PS" and len(parts) == 3:
                        if parts[1] != "1":
                            raise ValueError("unsupported state version")
                        if parts[2] != p.fingerprint():
                            raise ValueError("state file belongs to different parameters")
                    elif parts[0] == "SEC" and len(parts) == 7:
                        sec = CredentialSecret(
                            s=p.decode_scalar(bytes.fromhex(parts[1])),
                            q=p.decode_scalar(bytes.fromhex(parts[2])),
                            b=int(parts[3]),
                            r_s=p.decode_scalar(bytes.fromhex(parts[4])),
                            r_q=p.decode_scalar(bytes.fromhex(parts[5])),
                            r_b=p.decode_scalar(bytes.fromhex(parts[6])),
                        )
                    elif parts[0] == "PUB" and len(parts) == 5:
                        pub = CredentialPublic(
                            cm_s=Commitment(p.decode_element(bytes.fromhex(parts[1]))),
                            cm_q=Commitment(p.decode_element(bytes.fromhex(parts[2]))),
                            cm_b=Commitment(p.decode_element(bytes.fromhex(parts[3]))),
                            sig=bytes.fromhex(parts[4]),
                        )
                    elif parts[0] == "PT" and len(parts) == 5:
                        j, t, a = parts[1], int(parts[2]), int(parts[4])
                        validate_space_id(j)
                        if a not in (0, 1):
                            raise ValueError("bad availability bit")
                        ticket = Commitment(p.decode_element(bytes.fromhex(parts[3])))
                        pending[(j, t)] = PendingTicket(j, t, ticket, a)
                    else:
                        raise ValueError("unknown tag")
                except (ValueError, IndexError) as exc:
                    raise ClientError("corrupt state file line %d: %s" % (lineno, line)) from exc
        if sec is None or pub is None:
            raise ClientError("state file is missing the credential")
        if not verify_credential(bundle.server_key, pub.cm_s, pub.cm_q, pub.cm_b, pub.sig, p):
            raise ClientError("stored credential fails signature verification")
        client._secret = sec
        client._public = pub
        client._pending = pending
        return client
