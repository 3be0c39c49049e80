"""Prime-order group arithmetic for the commitment scheme.

The group is the subgroup of quadratic residues of Z_q* for a safe prime
q = 2p + 1. That subgroup has prime order p, so every element other than the
identity generates it, exponents live in the scalar field Z_p, and Pedersen
commitments over two generators with unknown mutual discrete log are binding
under the discrete-log assumption.

All values are plain Python ints; byte encodings are fixed-width big-endian
so concatenations hash deterministically on every party.
"""

from __future__ import annotations

import hashlib
import random
import secrets
import struct
from dataclasses import dataclass

from . import backend

HASH_NAME = "sha256"

_PRIME_REPS = 40


def _hash(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


@dataclass(frozen=True)
class GroupParams:
    """A safe-prime group with two independent generators g and h.

    q: safe-prime modulus, q = 2p + 1.
    p: prime order of the quadratic-residue subgroup (the scalar field).
    g, h: generators of that subgroup; log_g(h) must be unknown to everyone,
        which gen_params ensures by deriving h from a hash.
    bits: size of q in bits.
    """

    q: int
    p: int
    g: int
    h: int
    bits: int = 0

    def __post_init__(self):
        if self.bits == 0:
            object.__setattr__(self, "bits", self.q.bit_length())

    # -- validation -----------------------------------------------------

    def validate(self) -> None:
        """Raise ValueError unless the parameters form a sound group."""
        if self.q != 2 * self.p + 1:
            raise ValueError("q must equal 2p + 1")
        if self.bits != self.q.bit_length() or self.bits < 5:
            raise ValueError("bits does not match q")
        if not backend.is_probable_prime(self.p, _PRIME_REPS):
            raise ValueError("subgroup order p is not prime")
        if not backend.is_probable_prime(self.q, _PRIME_REPS):
            raise ValueError("modulus q is not prime")
        for name, gen in (("g", self.g), ("h", self.h)):
            if not 1 < gen < self.q:
                raise ValueError("generator %s out of range" % name)
            if backend.powmod(gen, self.p, self.q) != 1:
                raise ValueError("generator %s is not a quadratic residue" % name)
        if self.g == self.h:
            raise ValueError("generators must be distinct")

    # -- sizes and constants ----------------------------------------------

    @property
    def element_bytes(self) -> int:
        return (self.q.bit_length() + 7) // 8

    @property
    def scalar_bytes(self) -> int:
        return (self.p.bit_length() + 7) // 8

    @property
    def identity(self) -> int:
        return 1

    # -- scalar field (mod p) ----------------------------------------------

    def scalar_add(self, a: int, b: int) -> int:
        return (a + b) % self.p

    def scalar_sub(self, a: int, b: int) -> int:
        return (a - b) % self.p

    def scalar_mul(self, a: int, b: int) -> int:
        return (a * b) % self.p

    def scalar_neg(self, a: int) -> int:
        return -a % self.p

    def scalar_inv(self, a: int) -> int:
        if a % self.p == 0:
            raise ValueError("zero has no inverse")
        return backend.invmod(a % self.p, self.p)

    def random_scalar(self, rng=None) -> int:
        rng = rng or secrets.SystemRandom()
        return rng.randrange(self.p)

    # -- group (mod q) -------------------------------------------------------

    def is_element(self, e) -> bool:
        """Membership test: e must be a quadratic residue in [1, q)."""
        if not isinstance(e, int) or isinstance(e, bool) or not 1 <= e < self.q:
            return False
        return backend.powmod(e, self.p, self.q) == 1

    def group_mul(self, e1: int, e2: int) -> int:
        return e1 * e2 % self.q

    def group_pow(self, e: int, x: int) -> int:
        # The subgroup has order p, so exponents reduce mod p.
        return backend.powmod(e, x % self.p, self.q)

    def group_inv(self, e: int) -> int:
        return backend.invmod(e % self.q, self.q)

    # -- hashing ------------------------------------------------------------

    def hash_to_scalar(self, data: bytes) -> int:
        return int.from_bytes(_hash(data), "big") % self.p

    def hash_to_group(self, data: bytes) -> int:
        """Map bytes to a subgroup element by reducing mod q and squaring.

        The digest is mapped into [2, q-1] (values below 2 retry with a
        counter suffix); squaring then lands in the quadratic residues.
        """
        attempt = 0
        while True:
            material = data if attempt == 0 else data + struct.pack(">I", attempt)
            d = int.from_bytes(_hash(material), "big") % self.q
            if d >= 2:
                return d * d % self.q
            attempt += 1

    def fingerprint(self) -> str:
        """Stable hex digest identifying (q, g, h) and the hash algorithm."""
        blob = b"|".join(
            (
                b"parksense-group-v1",
                HASH_NAME.encode("ascii"),
                self.q.to_bytes(self.element_bytes, "big"),
                self.encode_element(self.g),
                self.encode_element(self.h),
            )
        )
        return _hash(blob).hex()

    # -- serialization ---------------------------------------------------------

    def encode_element(self, e: int) -> bytes:
        if not self.is_element(e):
            raise ValueError("not a group element")
        return e.to_bytes(self.element_bytes, "big")

    def decode_element(self, raw: bytes) -> int:
        if len(raw) != self.element_bytes:
            raise ValueError("bad element length")
        e = int.from_bytes(raw, "big")
        if not self.is_element(e):
            raise ValueError("not a group element")
        return e

    def encode_scalar(self, x: int) -> bytes:
        if not 0 <= x < self.p:
            raise ValueError("scalar out of range")
        return x.to_bytes(self.scalar_bytes, "big")

    def decode_scalar(self, raw: bytes) -> int:
        if len(raw) != self.scalar_bytes:
            raise ValueError("bad scalar length")
        x = int.from_bytes(raw, "big")
        if x >= self.p:
            raise ValueError("scalar out of range")
        return x


def _random_prime(bits: int, rng) -> int:
    while True:
        cand = rng.getrandbits(bits) | (1 << (bits - 1)) | 1
        if backend.is_probable_prime(cand, _PRIME_REPS):
            return cand


def gen_params(bits: int, seed: bytes) -> GroupParams:
    """Generate a safe-prime group whose modulus q has `bits` bits.

    Deterministic in seed. g is the square of the smallest integer >= 2
    giving a non-identity element; h is hash-derived from the seed so its
    discrete log stays unknown. Production deployments should use
    bits >= 2048 (see pinned_2048); tiny sizes exist for exhaustive tests.
    """
    if bits < 5:
        raise ValueError("bits must be at least 5")
    rng = random.Random(seed)
    while True:
        p = _random_prime(bits - 1, rng)
        q = 2 * p + 1
        if q.bit_length() == bits and backend.is_probable_prime(q, _PRIME_REPS):
            break
    params = _derive_generators(q, p, seed)
    params.validate()
    return params


def _derive_generators(q: int, p: int, seed: bytes) -> GroupParams:
    base = 2
    while base * base % q == 1:
        base += 1
    g = base * base % q
    scratch = GroupParams(q, p, g, g)
    attempt = 0
    while True:
        material = seed + b"h-gen" if attempt == 0 else seed + b"h-gen" + struct.pack(">I", attempt)
        h = scratch.hash_to_group(material)
        if h not in (1, g):
            return GroupParams(q, p, g, h)
        attempt += 1


# RFC 3526 MODP-2048 safe prime. g = 4 follows the smallest-square rule and
# h is hash-derived, so its discrete log relative to g is unknown.
_Q_2048 = int(
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74"
    "020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437"
    "4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05"
    "98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB"
    "9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B"
    "E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718"
    "3995497CEA956AE515D2261898FA051015728E5A8AACAA68FFFFFFFFFFFFFFFF",
    16,
)

_PINNED: GroupParams | None = None


def pinned_2048() -> GroupParams:
    """The default production group (RFC 3526 MODP-2048), validated once."""
    global _PINNED
    if _PINNED is None:
        q = _Q_2048
        params = _derive_generators(q, (q - 1) // 2, b"parksense-modp-2048")
        params.validate()
        _PINNED = params
    return _PINNED
