"""Sigma-protocol proofs over Pedersen commitments, in Fiat-Shamir form.

Four statements are provable:

- CmProof: knowledge of an opening (x, r) of c. In known-mask mode r is
  public, the prover sets r' = 0 and omits z_r, and the verifier
  reconstructs z_r = beta * r.
- MbsProof: the committed value lies in a public set (OR-composition; the
  real branch absorbs the challenge remainder beta_i = beta - sum others).
- NNProof: the committed value is a non-negative integer below 2^m, by bit
  decomposition: one commitment and one {0,1} membership proof per bit plus
  an aggregate equation tying the bits to c.
- LinkProof: two commitments (hidden mask / known mask) open to the same
  value, via a shared z_x response.

Verifiers recompute every challenge; the only transmitted challenges are
the per-branch beta_j inside MbsProof. Interactive variants with explicit
challenges live in parksense.oracles and exist purely as test oracles.
"""

from __future__ import annotations

import hashlib
import secrets
import struct
from dataclasses import dataclass
from typing import Sequence

from .commitments import Commitment, Opening, commit, verify_opening
from .groups import GroupParams

MODE_HIDDEN = "hidden-mask"
MODE_KNOWN = "known-mask"

MAX_SET_SIZE = 64


def fiat_shamir_challenge(
    context: bytes, commitments: Sequence[Commitment], params: GroupParams
) -> int:
    """beta = H(context || cm_1 | cm_2 | ... | cm_r) reduced into the scalar field."""
    joined = b"\x7c".join(params.encode_element(c.element) for c in commitments)
    return params.hash_to_scalar(context + joined)


def _is_scalar(x, params: GroupParams) -> bool:
    return isinstance(x, int) and not isinstance(x, bool) and 0 <= x < params.p


def _is_commitment(c, params: GroupParams) -> bool:
    return isinstance(c, Commitment) and params.is_element(c.element)


# ---------------------------------------------------------------------------
# CmProof

@dataclass(frozen=True)
class CmProof:
    a: Commitment
    z_x: int
    z_r: int | None
    mode: str


def prove_cm(
    opening: Opening,
    c: Commitment,
    context: bytes,
    params: GroupParams,
    rng=None,
    mode: str = MODE_HIDDEN,
) -> CmProof:
    if mode not in (MODE_HIDDEN, MODE_KNOWN):
        raise ValueError("unknown proof mode")
    if not verify_opening(c, opening, params):
        raise ValueError("opening does not match the commitment")
    rng = rng or secrets.SystemRandom()
    x_p = params.random_scalar(rng)
    r_p = 0 if mode == MODE_KNOWN else params.random_scalar(rng)
    a = commit(x_p, r_p, params)
    beta = fiat_shamir_challenge(context, [a, c], params)
    z_x = params.scalar_add(x_p, params.scalar_mul(beta, opening.x))
    if mode == MODE_KNOWN:
        return CmProof(a, z_x, None, MODE_KNOWN)
    z_r = params.scalar_add(r_p, params.scalar_mul(beta, opening.r))
    return CmProof(a, z_x, z_r, MODE_HIDDEN)


def check_cm_response(
    a: Commitment, z_x: int, z_r: int, c: Commitment, beta: int, params: GroupParams
) -> bool:
    """The verification equation g^z_x * h^z_r == a * c^beta."""
    lhs = commit(z_x, z_r, params)
    rhs = params.group_mul(a.element, params.group_pow(c.element, beta))
    return lhs.element == rhs


def resolve_cm_z_r(proof: CmProof, beta: int, known_mask: int | None, params: GroupParams):
    """z_r as the verifier sees it: transmitted, or beta*mask in known-mask mode.

    Returns None when the proof is structurally inconsistent with what the
    verifier expects (wrong mode for the call site included), which callers
    treat as verification failure.
    """
    if proof.mode == MODE_KNOWN:
        if known_mask is None or proof.z_r is not None:
            return None
        return params.scalar_mul(beta, known_mask)
    if proof.mode == MODE_HIDDEN:
        if known_mask is not None or not _is_scalar(proof.z_r, params):
            return None
        return proof.z_r
    return None


def verify_cm(
    proof: CmProof,
    c: Commitment,
    context: bytes,
    params: GroupParams,
    known_mask: int | None = None,
) -> bool:
    if not isinstance(proof, CmProof):
        return False
    if not _is_commitment(proof.a, params) or not _is_commitment(c, params):
        return False
    if not _is_scalar(proof.z_x, params):
        return False
    beta = fiat_shamir_challenge(context, [proof.a, c], params)
    z_r = resolve_cm_z_r(proof, beta, known_mask, params)
    if z_r is None:
        return False
    return check_cm_response(proof.a, proof.z_x, z_r, c, beta, params)


# ---------------------------------------------------------------------------
# MbsProof

@dataclass(frozen=True)
class MbsBranch:
    a: Commitment
    z_x: int
    beta: int
    z_r: int


@dataclass(frozen=True)
class MbsProof:
    branches: tuple[MbsBranch, ...]

    @property
    def n(self) -> int:
        return len(self.branches)


def _check_set(xset: Sequence[int], params: GroupParams) -> list[int]:
    values = [x % params.p for x in xset]
    if not values:
        raise ValueError("membership set must not be empty")
    if len(values) > MAX_SET_SIZE:
        raise ValueError("membership set too large")
    if len(set(values)) != len(values):
        raise ValueError("membership set values must be distinct")
    return values


def prove_mbs(
    opening: Opening,
    c: Commitment,
    xset: Sequence[int],
    context: bytes,
    params: GroupParams,
    rng=None,
) -> MbsProof:
    values = _check_set(xset, params)
    if not verify_opening(c, opening, params):
        raise ValueError("opening does not match the commitment")
    x = opening.x % params.p
    try:
        i = values.index(x)
    except ValueError:
        raise ValueError("committed value is not in the membership set") from None
    rng = rng or secrets.SystemRandom()

    firsts: list[Commitment] = []
    z_xs: list[int] = []
    masks: list[int] = []
    betas: list[int | None] = []
    for j, x_j in enumerate(values):
        x_p = params.random_scalar(rng)
        r_p = params.random_scalar(rng)
        firsts.append(commit(x_p, r_p, params))
        masks.append(r_p)
        if j == i:
            # The real branch answers honestly once the challenge is known.
            z_xs.append(x_p)
            betas.append(None)
        else:
            beta_j = params.random_scalar(rng)
            betas.append(beta_j)
            z_xs.append(params.scalar_add(x_p, params.scalar_mul(x - x_j, beta_j)))

    beta = fiat_shamir_challenge(context, firsts + [c], params)
    others = sum(b for b in betas if b is not None)
    betas[i] = params.scalar_sub(beta, others)

    branches = tuple(
        MbsBranch(
            firsts[j],
            z_xs[j],
            betas[j],
            params.scalar_add(masks[j], params.scalar_mul(opening.r, betas[j])),
        )
        for j in range(len(values))
    )
    return MbsProof(branches)


def check_mbs_branches(
    proof: MbsProof, c: Commitment, values: Sequence[int], beta: int, params: GroupParams
) -> bool:
    """Structure, challenge split, and the per-branch equations.

    g^z_x_j * h^z_r_j == a_j * (c / g^x_j)^beta_j for every j, and the
    branch challenges must sum to the global challenge.
    """
    if not isinstance(proof, MbsProof) or proof.n != len(values):
        return False
    if not _is_commitment(c, params):
        return False
    for br in proof.branches:
        if not isinstance(br, MbsBranch) or not _is_commitment(br.a, params):
            return False
        if not all(_is_scalar(v, params) for v in (br.z_x, br.beta, br.z_r)):
            return False
    if sum(br.beta for br in proof.branches) % params.p != beta % params.p:
        return False
    for br, x_j in zip(proof.branches, values):
        shifted = params.group_mul(c.element, params.group_inv(params.group_pow(params.g, x_j)))
        rhs = params.group_mul(br.a.element, params.group_pow(shifted, br.beta))
        if commit(br.z_x, br.z_r, params).element != rhs:
            return False
    return True


def verify_mbs(
    proof: MbsProof,
    c: Commitment,
    xset: Sequence[int],
    context: bytes,
    params: GroupParams,
) -> bool:
    try:
        values = _check_set(xset, params)
    except ValueError:
        return False
    if not isinstance(proof, MbsProof) or not all(
        isinstance(br, MbsBranch) and _is_commitment(br.a, params) for br in proof.branches
    ):
        return False
    if proof.n != len(values) or not _is_commitment(c, params):
        return False
    beta = fiat_shamir_challenge(context, [br.a for br in proof.branches] + [c], params)
    return check_mbs_branches(proof, c, values, beta, params)


# ---------------------------------------------------------------------------
# NNProof

@dataclass(frozen=True)
class NNProof:
    m: int
    bit_commitments: tuple[Commitment, ...]
    bit_proofs: tuple[MbsProof, ...]
    a0: Commitment
    z_r: int


class NNTranscriptHash:
    """Running Fiat-Shamir transcript for the bit-decomposition proof.

    Every challenge is derived from the chain state, which absorbs the
    statement, all bit commitments, and each bit proof's first moves in
    order, so no component can be swapped after the fact.
    """

    def __init__(self, context: bytes, c: Commitment, bit_cms: Sequence[Commitment], params: GroupParams):
        self._params = params
        h = hashlib.sha256(b"parksense-nn1|" + context)
        h.update(b"|" + params.encode_element(c.element))
        for cm in bit_cms:
            h.update(b"|" + params.encode_element(cm.element))
        self._state = h.digest()

    def bit_context(self, i: int) -> bytes:
        return self._state + b"|bit|" + struct.pack(">I", i)

    def absorb_first_moves(self, proof: MbsProof) -> None:
        h = hashlib.sha256(self._state)
        for br in proof.branches:
            h.update(b"|" + self._params.encode_element(br.a.element))
        self._state = h.digest()

    def aggregate_context(self) -> bytes:
        return self._state + b"|agg"


def _check_nn_width(m: int, params: GroupParams) -> None:
    if m < 1:
        raise ValueError("bit width must be positive")
    if (1 << m) > params.p:
        raise ValueError("bit width exceeds the scalar field")


def prove_nn(
    opening: Opening,
    c: Commitment,
    m: int,
    context: bytes,
    params: GroupParams,
    rng=None,
) -> NNProof:
    _check_nn_width(m, params)
    if not verify_opening(c, opening, params):
        raise ValueError("opening does not match the commitment")
    x = opening.x % params.p
    if x >= (1 << m):
        raise ValueError("value out of range for the bit width")
    rng = rng or secrets.SystemRandom()

    bits = [(x >> i) & 1 for i in range(m)]
    bit_masks = [params.random_scalar(rng) for _ in range(m)]
    bit_cms = [commit(bits[i], bit_masks[i], params) for i in range(m)]

    transcript = NNTranscriptHash(context, c, bit_cms, params)
    bit_proofs = []
    for i in range(m):
        proof_i = prove_mbs(
            Opening(bits[i], bit_masks[i]),
            bit_cms[i],
            (0, 1),
            transcript.bit_context(i),
            params,
            rng,
        )
        transcript.absorb_first_moves(proof_i)
        bit_proofs.append(proof_i)

    r_p = params.random_scalar(rng)
    a0 = commit(0, r_p, params)
    beta = fiat_shamir_challenge(transcript.aggregate_context(), [a0, c], params)
    # w = sum(r_i * 2^(i-1)) - r; the aggregate equation checks h^z_r.
    w = params.scalar_sub(
        sum(bit_masks[i] << i for i in range(m)) % params.p, opening.r
    )
    z_r = params.scalar_add(r_p, params.scalar_mul(beta, w))
    return NNProof(m, tuple(bit_cms), tuple(bit_proofs), a0, z_r)


def check_nn_aggregate(
    bit_cms: Sequence[Commitment],
    a0: Commitment,
    z_r: int,
    c: Commitment,
    beta: int,
    params: GroupParams,
) -> bool:
    """h^z_r == a0 * c^(-beta) * prod bit_cm_i^(beta * 2^(i-1))."""
    lhs = params.group_pow(params.h, z_r)
    rhs = params.group_mul(
        a0.element, params.group_inv(params.group_pow(c.element, beta))
    )
    for i, cm in enumerate(bit_cms):
        rhs = params.group_mul(rhs, params.group_pow(cm.element, beta << i))
    return lhs == rhs


def verify_nn(
    proof: NNProof,
    c: Commitment,
    m: int,
    context: bytes,
    params: GroupParams,
) -> bool:
    try:
        _check_nn_width(m, params)
    except ValueError:
        return False
    if not isinstance(proof, NNProof) or proof.m != m:
        return False
    if len(proof.bit_commitments) != m or len(proof.bit_proofs) != m:
        return False
    if not _is_commitment(c, params) or not _is_commitment(proof.a0, params):
        return False
    if not all(_is_commitment(cm, params) for cm in proof.bit_commitments):
        return False
    if not _is_scalar(proof.z_r, params):
        return False

    transcript = NNTranscriptHash(context, c, proof.bit_commitments, params)
    for i in range(m):
        if not verify_mbs(
            proof.bit_proofs[i],
            proof.bit_commitments[i],
            (0, 1),
            transcript.bit_context(i),
            params,
        ):
            return False
        transcript.absorb_first_moves(proof.bit_proofs[i])
    beta = fiat_shamir_challenge(transcript.aggregate_context(), [proof.a0, c], params)
    return check_nn_aggregate(proof.bit_commitments, proof.a0, proof.z_r, c, beta, params)


# ---------------------------------------------------------------------------
# LinkProof

@dataclass(frozen=True)
class LinkProof:
    a_cred: Commitment
    a_ticket: Commitment
    z_x: int
    z_r: int


def prove_link(
    opening: Opening,
    c_cred: Commitment,
    ticket: Commitment,
    known_mask: int,
    context: bytes,
    params: GroupParams,
    rng=None,
) -> LinkProof:
    """Prove c_cred and ticket commit to the same value.

    opening is (s, r_s) for the credential commitment; the ticket's mask is
    public. One challenge and one shared z_x bind the two statements.
    """
    if not verify_opening(c_cred, opening, params):
        raise ValueError("opening does not match the credential commitment")
    if not verify_opening(ticket, Opening(opening.x, known_mask), params):
        raise ValueError("ticket does not commit to the same value")
    rng = rng or secrets.SystemRandom()
    x_p = params.random_scalar(rng)
    r_p = params.random_scalar(rng)
    a_cred = commit(x_p, r_p, params)
    a_ticket = commit(x_p, 0, params)
    beta = fiat_shamir_challenge(context, [a_cred, a_ticket, c_cred, ticket], params)
    z_x = params.scalar_add(x_p, params.scalar_mul(beta, opening.x))
    z_r = params.scalar_add(r_p, params.scalar_mul(beta, opening.r))
    return LinkProof(a_cred, a_ticket, z_x, z_r)


def verify_link(
    proof: LinkProof,
    c_cred: Commitment,
    ticket: Commitment,
    known_mask: int,
    context: bytes,
    params: GroupParams,
) -> bool:
    if not isinstance(proof, LinkProof):
        return False
    if not all(
        _is_commitment(c, params) for c in (proof.a_cred, proof.a_ticket, c_cred, ticket)
    ):
        return False
    if not _is_scalar(proof.z_x, params) or not _is_scalar(proof.z_r, params):
        return False
    if not _is_scalar(known_mask, params):
        return False
    beta = fiat_shamir_challenge(context, [proof.a_cred, proof.a_ticket, c_cred, ticket], params)
    eq_cred = check_cm_response(proof.a_cred, proof.z_x, proof.z_r, c_cred, beta, params)
    eq_ticket = check_cm_response(
        proof.a_ticket, proof.z_x, params.scalar_mul(beta, known_mask), ticket, beta, params
    )
    return eq_cred and eq_ticket
