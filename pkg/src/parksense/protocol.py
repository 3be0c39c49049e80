"""Shared protocol vocabulary: statuses, rejection reasons, context strings,
ticket masks, and the credential structures both sides exchange.

Context strings feed the Fiat-Shamir hash of every proof. Each binds the
protocol name, stage tag, params fingerprint, and (for sessions) the session
nonce, so a proof can never be replayed across stages, sessions, or
deployments.
"""

from __future__ import annotations

from dataclasses import dataclass

from .commitments import Commitment
from .groups import HASH_NAME, GroupParams
from .signatures import PublicKey

STATUS_AVAILABLE = "available"
STATUS_OCCUPIED = "occupied"
STATUS_UNCONFIRMED = "unconfirmed"
STATUSES = (STATUS_AVAILABLE, STATUS_OCCUPIED, STATUS_UNCONFIRMED)

REASON_BAD_PROOF = "bad-proof"
REASON_BAD_SIGNATURE = "bad-signature"
REASON_DUPLICATE = "duplicate"
REASON_STALE_TIME = "stale-time"
REASON_NO_CREDIT = "no-credit"
REASON_IDENTIFIER_SPENT = "identifier-spent"
REASON_BAD_OPENING = "bad-opening"
REASON_OUT_OF_ORDER = "out-of-order-step"
REASON_INSUFFICIENT_BALANCE = "insufficient-balance"
REASON_BAD_REQUEST = "bad-request"

# Space identifiers appear verbatim in journal lines and hash inputs.
_SPACE_ID_MAX = 128


class Rejection(Exception):
    """A protocol-level rejection with a stage tag and a pinned reason."""

    def __init__(self, stage: str, reason: str):
        super().__init__("%s: %s" % (stage, reason))
        self.stage = stage
        self.reason = reason


def validate_space_id(j: str) -> str:
    if not isinstance(j, str) or not j or len(j) > _SPACE_ID_MAX:
        raise ValueError("bad space identifier")
    if "|" in j or "\n" in j or "\r" in j:
        raise ValueError("space identifier must not contain '|' or newlines")
    return j


def encode_space(j: str) -> bytes:
    return j.encode("utf-8")


def encode_slot(t: int) -> bytes:
    if not 0 <= t < 1 << 64:
        raise ValueError("time slot out of range")
    return t.to_bytes(8, "big")


def ticket_mask(j: str, t: int, params: GroupParams) -> int:
    """The public mask H(j|t) that makes tickets deterministic per (j, t)."""
    return params.hash_to_scalar(encode_space(j) + b"\x7c" + encode_slot(t))


def submission_context(params: GroupParams, j: str, t: int, a: int) -> bytes:
    return b"|".join(
        (
            b"parksense1",
            b"submit",
            params.fingerprint().encode("ascii"),
            encode_space(j),
            encode_slot(t),
            b"%d" % a,
        )
    )


def claim_context(params: GroupParams, j: str, t: int, nonce: str) -> bytes:
    return b"|".join(
        (
            b"parksense1",
            b"claim-open",
            params.fingerprint().encode("ascii"),
            encode_space(j),
            encode_slot(t),
            nonce.encode("ascii"),
        )
    )


def inquiry_cm_context(params: GroupParams, nonce: str) -> bytes:
    return b"|".join(
        (b"parksense1", b"inquire-cm", params.fingerprint().encode("ascii"), nonce.encode("ascii"))
    )


def inquiry_nn_context(params: GroupParams, nonce: str) -> bytes:
    return b"|".join(
        (b"parksense1", b"inquire-nn", params.fingerprint().encode("ascii"), nonce.encode("ascii"))
    )


@dataclass(frozen=True)
class CredentialPublic:
    """The server-signed commitment triple (Cm(s), Cm(q), Cm(b))."""

    cm_s: Commitment
    cm_q: Commitment
    cm_b: Commitment
    sig: bytes


@dataclass
class CredentialSecret:
    """The client-side openings: secret key s, identifier q, balance b.

    r_s and r_b never change across the credential's lifetime (the server
    only ever multiplies by zero-mask commitments); r_q is replaced together
    with q on every claim/inquiry refresh.
    """

    s: int
    q: int
    b: int
    r_s: int
    r_q: int
    r_b: int


@dataclass(frozen=True)
class PublicBundle:
    """Everything a client needs from setup, as published by the server."""

    params: GroupParams
    server_key: PublicKey
    hash_name: str
    b0: int
    c_q: int
    nn_bits: int
    epsilon: int
    slot_length: float

    def validate(self) -> None:
        self.params.validate()
        if self.hash_name != HASH_NAME:
            raise ValueError("unsupported hash")
        if self.server_key.n < 3 or self.server_key.e < 3:
            raise ValueError("bad server key")
        if not 0 <= self.b0 < (1 << self.nn_bits):
            raise ValueError("b0 out of range for the proof width")
        if self.c_q < 0 or self.epsilon < 0 or self.slot_length <= 0:
            raise ValueError("bad protocol constants")
        if self.nn_bits < 1 or (1 << self.nn_bits) > self.params.p:
            raise ValueError("nn_bits incompatible with group order")

    @property
    def fingerprint(self) -> str:
        return self.params.fingerprint()
