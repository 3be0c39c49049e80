"""Hash-then-sign credential signatures.

Textbook RSA over a SHA-256 digest: sign(m) = (H(m) mod n)^d mod n, verified
by comparing sig^e mod n against H(m) mod n. This mirrors the protocol's
Enc/Dec formulation exactly. Production deployments should swap in a padded
standard scheme; sign_credential/verify_credential are the single seam.
"""

from __future__ import annotations

import hashlib
import secrets
from dataclasses import dataclass

from . import backend
from .commitments import Commitment
from .groups import GroupParams

_E = 65537
_PRIME_REPS = 40


@dataclass(frozen=True)
class PublicKey:
    n: int
    e: int

    @property
    def sig_bytes(self) -> int:
        return (self.n.bit_length() + 7) // 8


@dataclass(frozen=True)
class ServerKeys:
    n: int
    e: int
    d: int

    @property
    def public(self) -> PublicKey:
        return PublicKey(self.n, self.e)


def _random_prime(bits: int, rng) -> int:
    while True:
        # Top two bits set so the product has full width.
        cand = rng.getrandbits(bits) | (3 << (bits - 2)) | 1
        if backend.is_probable_prime(cand, _PRIME_REPS):
            return cand


def keygen(bits: int, rng=None) -> ServerKeys:
    """Generate a key pair with a `bits`-bit modulus.

    Deterministic under a seeded rng. bits >= 512 for production; >= 64 is
    allowed so tests stay fast.
    """
    if bits < 64 or bits % 2:
        raise ValueError("bits must be even and at least 64")
    rng = rng or secrets.SystemRandom()
    while True:
        p = _random_prime(bits // 2, rng)
        q = _random_prime(bits // 2, rng)
        if p == q:
            continue
        n = p * q
        if n.bit_length() != bits:
            continue
        phi = (p - 1) * (q - 1)
        try:
            d = backend.invmod(_E, phi)
        except ValueError:
            continue
        return ServerKeys(n, _E, d)


def _digest_int(message: bytes, n: int) -> int:
    return int.from_bytes(hashlib.sha256(message).digest(), "big") % n


def sign(keys: ServerKeys, message: bytes) -> bytes:
    value = backend.powmod(_digest_int(message, keys.n), keys.d, keys.n)
    return value.to_bytes(keys.public.sig_bytes, "big")


def verify(pub: PublicKey, message: bytes, sig: bytes) -> bool:
    if not isinstance(sig, bytes) or len(sig) != pub.sig_bytes:
        return False
    value = int.from_bytes(sig, "big")
    if value >= pub.n:
        return False
    return backend.powmod(value, pub.e, pub.n) == _digest_int(message, pub.n)


def credential_message(cm_s: Commitment, cm_q: Commitment, cm_b: Commitment, params: GroupParams) -> bytes:
    """The normative signed byte layout: serialize(cm_s)|serialize(cm_q)|serialize(cm_b)."""
    return b"\x7c".join(
        (
            params.encode_element(cm_s.element),
            params.encode_element(cm_q.element),
            params.encode_element(cm_b.element),
        )
    )


def sign_credential(
    keys: ServerKeys, cm_s: Commitment, cm_q: Commitment, cm_b: Commitment, params: GroupParams
) -> bytes:
    return sign(keys, credential_message(cm_s, cm_q, cm_b, params))


def verify_credential(
    pub: PublicKey,
    cm_s: Commitment,
    cm_q: Commitment,
    cm_b: Commitment,
    sig: bytes,
    params: GroupParams,
) -> bool:
    return verify(pub, credential_message(cm_s, cm_q, cm_b, params), sig)
