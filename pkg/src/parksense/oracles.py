"""Interactive-mode oracles for the sigma protocols: rewindable honest
provers, explicit-challenge verifiers, knowledge extractors, and HVZK
simulators.

Nothing here ships over the wire. The deployed protocol is non-interactive
only; these oracles exist so tests can certify special soundness (rewind a
prover with two challenges, extract the witness) and zero-knowledge
(simulate transcripts without the witness, compare distributions).
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass
from typing import Sequence

from .commitments import Commitment, Opening, commit, verify_opening
from .groups import GroupParams
from .proofs import (
    MODE_HIDDEN,
    MODE_KNOWN,
    MbsBranch,
    MbsProof,
    check_cm_response,
    check_mbs_branches,
    check_nn_aggregate,
)

# ---------------------------------------------------------------------------
# zkpCm

@dataclass(frozen=True)
class CmTranscript:
    a: Commitment
    beta: int
    z_x: int
    z_r: int | None
    mode: str


class CmProver:
    """Honest interactive prover; the first move is fixed at construction so
    respond() may be rewound with any number of challenges."""

    def __init__(self, opening: Opening, c: Commitment, params: GroupParams, rng=None,
                 mode: str = MODE_HIDDEN):
        if mode not in (MODE_HIDDEN, MODE_KNOWN):
            raise ValueError("unknown proof mode")
        if not verify_opening(c, opening, params):
            raise ValueError("opening does not match the commitment")
        rng = rng or secrets.SystemRandom()
        self._params = params
        self._opening = opening
        self._mode = mode
        self._x_p = params.random_scalar(rng)
        self._r_p = 0 if mode == MODE_KNOWN else params.random_scalar(rng)
        self.first_move = commit(self._x_p, self._r_p, params)

    def respond(self, beta: int) -> CmTranscript:
        params = self._params
        z_x = params.scalar_add(self._x_p, params.scalar_mul(beta, self._opening.x))
        if self._mode == MODE_KNOWN:
            return CmTranscript(self.first_move, beta % params.p, z_x, None, MODE_KNOWN)
        z_r = params.scalar_add(self._r_p, params.scalar_mul(beta, self._opening.r))
        return CmTranscript(self.first_move, beta % params.p, z_x, z_r, MODE_HIDDEN)


def verify_cm_transcript(t: CmTranscript, c: Commitment, params: GroupParams,
                         known_mask: int | None = None) -> bool:
    if t.mode == MODE_KNOWN:
        if known_mask is None:
            raise ValueError("known-mask verification requires the mask")
        if t.z_r is not None:
            return False
        z_r = params.scalar_mul(t.beta, known_mask)
    else:
        if t.z_r is None:
            return False
        z_r = t.z_r
    return check_cm_response(t.a, t.z_x, z_r, c, t.beta, params)


def extract_secret(t1: CmTranscript, t2: CmTranscript, params: GroupParams) -> int:
    """x = (z'_x - z''_x) / (beta1 - beta2), the special-soundness witness."""
    if t1.a != t2.a:
        raise ValueError("transcripts must share the first move")
    if t1.beta % params.p == t2.beta % params.p:
        raise ValueError("challenges must differ")
    diff = params.scalar_sub(t1.z_x, t2.z_x)
    return params.scalar_mul(diff, params.scalar_inv(params.scalar_sub(t1.beta, t2.beta)))


def extract_cm_opening(t1: CmTranscript, t2: CmTranscript, params: GroupParams,
                       known_mask: int | None = None) -> Opening:
    x = extract_secret(t1, t2, params)
    if t1.mode == MODE_KNOWN:
        if known_mask is None:
            raise ValueError("known-mask extraction requires the mask")
        return Opening(x, known_mask % params.p)
    inv = params.scalar_inv(params.scalar_sub(t1.beta, t2.beta))
    r = params.scalar_mul(params.scalar_sub(t1.z_r, t2.z_r), inv)
    return Opening(x, r)


def simulate_cm(c: Commitment, beta: int, params: GroupParams, rng=None,
                mode: str = MODE_HIDDEN, known_mask: int | None = None) -> CmTranscript:
    """HVZK simulator: sample the response first, solve for the first move
    a = Cm(z_x, z_r) * c^(-beta). Never touches any witness."""
    rng = rng or secrets.SystemRandom()
    beta = beta % params.p
    z_x = params.random_scalar(rng)
    if mode == MODE_KNOWN:
        if known_mask is None:
            raise ValueError("known-mask simulation requires the mask")
        z_r_eff = params.scalar_mul(beta, known_mask)
        sent_z_r = None
    elif mode == MODE_HIDDEN:
        z_r_eff = params.random_scalar(rng)
        sent_z_r = z_r_eff
    else:
        raise ValueError("unknown proof mode")
    a = Commitment(
        params.group_mul(
            commit(z_x, z_r_eff, params).element,
            params.group_inv(params.group_pow(c.element, beta)),
        )
    )
    return CmTranscript(a, beta, z_x, sent_z_r, mode)


# ---------------------------------------------------------------------------
# zkpMbs

@dataclass(frozen=True)
class MbsTranscript:
    branches: tuple[MbsBranch, ...]
    beta: int


class MbsProver:
    """Rewindable OR-proof prover. Simulated branches fix their challenges at
    construction; only the real branch re-answers per challenge."""

    def __init__(self, opening: Opening, c: Commitment, xset: Sequence[int],
                 params: GroupParams, rng=None):
        rng = rng or secrets.SystemRandom()
        values = [x % params.p for x in xset]
        if len(set(values)) != len(values) or not values:
            raise ValueError("membership set must be non-empty with distinct values")
        if not verify_opening(c, opening, params):
            raise ValueError("opening does not match the commitment")
        x = opening.x % params.p
        if x not in values:
            raise ValueError("committed value is not in the membership set")
        self._params = params
        self._values = values
        self._r = opening.r % params.p
        self._i = values.index(x)
        self._firsts = []
        self._z_xs = []
        self._masks = []
        self._fixed_betas = []
        for j, x_j in enumerate(values):
            x_p = params.random_scalar(rng)
            r_p = params.random_scalar(rng)
            self._firsts.append(commit(x_p, r_p, params))
            self._masks.append(r_p)
            if j == self._i:
                self._z_xs.append(x_p)
                self._fixed_betas.append(None)
            else:
                beta_j = params.random_scalar(rng)
                self._fixed_betas.append(beta_j)
                self._z_xs.append(params.scalar_add(x_p, params.scalar_mul(x - x_j, beta_j)))
        self.first_moves = tuple(self._firsts)

    def respond(self, beta: int) -> MbsTranscript:
        params = self._params
        betas = list(self._fixed_betas)
        others = sum(b for b in betas if b is not None)
        betas[self._i] = params.scalar_sub(beta, others)
        branches = tuple(
            MbsBranch(
                self._firsts[j],
                self._z_xs[j],
                betas[j],
                params.scalar_add(self._masks[j], params.scalar_mul(self._r, betas[j])),
            )
            for j in range(len(self._values))
        )
        return MbsTranscript(branches, beta % params.p)


def verify_mbs_transcript(t: MbsTranscript, c: Commitment, xset: Sequence[int],
                          params: GroupParams) -> bool:
    values = [x % params.p for x in xset]
    return check_mbs_branches(MbsProof(t.branches), c, values, t.beta, params)


def extract_mbs(t1: MbsTranscript, t2: MbsTranscript, xset: Sequence[int],
                params: GroupParams) -> Opening:
    """Recover (x, r) from two accepting transcripts with shared first moves.

    Some branch k must carry different challenges; dividing its two
    verification equations leaves c / g^(x_k) = h^rho, i.e. the witness."""
    if len(t1.branches) != len(t2.branches):
        raise ValueError("transcript shapes differ")
    if t1.beta % params.p == t2.beta % params.p:
        raise ValueError("challenges must differ")
    values = [x % params.p for x in xset]
    for k, (b1, b2) in enumerate(zip(t1.branches, t2.branches)):
        if b1.a != b2.a or b1.z_x != b2.z_x:
            raise ValueError("transcripts must share first moves")
        if b1.beta != b2.beta:
            inv = params.scalar_inv(params.scalar_sub(b1.beta, b2.beta))
            rho = params.scalar_mul(params.scalar_sub(b1.z_r, b2.z_r), inv)
            return Opening(values[k], rho)
    raise ValueError("no branch with differing challenges")


def simulate_mbs(c: Commitment, xset: Sequence[int], beta: int, params: GroupParams,
                 rng=None) -> MbsTranscript:
    """Simulate every branch: sample responses, split the challenge, solve
    for each first move from the branch equation."""
    rng = rng or secrets.SystemRandom()
    values = [x % params.p for x in xset]
    beta = beta % params.p
    betas = [params.random_scalar(rng) for _ in values[:-1]]
    betas.append(params.scalar_sub(beta, sum(betas)))
    branches = []
    for x_j, beta_j in zip(values, betas):
        z_x = params.random_scalar(rng)
        z_r = params.random_scalar(rng)
        shifted = params.group_mul(c.element, params.group_inv(params.group_pow(params.g, x_j)))
        a = Commitment(
            params.group_mul(
                commit(z_x, z_r, params).element,
                params.group_inv(params.group_pow(shifted, beta_j)),
            )
        )
        branches.append(MbsBranch(a, z_x, beta_j, z_r))
    return MbsTranscript(tuple(branches), beta)


# ---------------------------------------------------------------------------
# zkpNN

@dataclass(frozen=True)
class NNTranscript:
    bit_commitments: tuple[Commitment, ...]
    bit_transcripts: tuple[MbsTranscript, ...]
    a0: Commitment
    beta: int
    z_r: int


class NNProver:
    """Rewindable bit-decomposition prover."""

    def __init__(self, opening: Opening, c: Commitment, m: int, params: GroupParams,
                 rng=None):
        rng = rng or secrets.SystemRandom()
        if m < 1 or (1 << m) > params.p:
            raise ValueError("bad bit width")
        if not verify_opening(c, opening, params):
            raise ValueError("opening does not match the commitment")
        x = opening.x % params.p
        if x >= (1 << m):
            raise ValueError("value out of range for the bit width")
        self._params = params
        bits = [(x >> i) & 1 for i in range(m)]
        masks = [params.random_scalar(rng) for _ in range(m)]
        self.bit_commitments = tuple(commit(bits[i], masks[i], params) for i in range(m))
        self._bit_provers = [
            MbsProver(Opening(bits[i], masks[i]), self.bit_commitments[i], (0, 1), params, rng)
            for i in range(m)
        ]
        self._r_p = params.random_scalar(rng)
        self.a0 = commit(0, self._r_p, params)
        self._w = params.scalar_sub(
            sum(masks[i] << i for i in range(m)) % params.p, opening.r
        )

    def respond(self, bit_betas: Sequence[int], beta: int) -> NNTranscript:
        params = self._params
        if len(bit_betas) != len(self._bit_provers):
            raise ValueError("one challenge per bit required")
        bit_ts = tuple(
            prover.respond(b) for prover, b in zip(self._bit_provers, bit_betas)
        )
        z_r = params.scalar_add(self._r_p, params.scalar_mul(beta, self._w))
        return NNTranscript(self.bit_commitments, bit_ts, self.a0, beta % params.p, z_r)


def verify_nn_transcript(t: NNTranscript, c: Commitment, m: int, params: GroupParams) -> bool:
    if len(t.bit_commitments) != m or len(t.bit_transcripts) != m:
        return False
    for cm, bt in zip(t.bit_commitments, t.bit_transcripts):
        if not verify_mbs_transcript(bt, cm, (0, 1), params):
            return False
    return check_nn_aggregate(t.bit_commitments, t.a0, t.z_r, c, t.beta, params)


def extract_nn(t1: NNTranscript, t2: NNTranscript, params: GroupParams) -> Opening:
    """Recover (x, r): extract each bit, then solve the aggregate equations
    for w = sum(r_i * 2^(i-1)) - r."""
    if t1.bit_commitments != t2.bit_commitments or t1.a0 != t2.a0:
        raise ValueError("transcripts must share first moves")
    if t1.beta % params.p == t2.beta % params.p:
        raise ValueError("challenges must differ")
    x = 0
    mask_sum = 0
    for i, (bt1, bt2) in enumerate(zip(t1.bit_transcripts, t2.bit_transcripts)):
        bit_opening = extract_mbs(bt1, bt2, (0, 1), params)
        x += bit_opening.x << i
        mask_sum += bit_opening.r << i
    inv = params.scalar_inv(params.scalar_sub(t1.beta, t2.beta))
    w = params.scalar_mul(params.scalar_sub(t1.z_r, t2.z_r), inv)
    r = params.scalar_sub(mask_sum % params.p, w)
    return Opening(x, r)


def simulate_nn(c: Commitment, m: int, bit_betas: Sequence[int], beta: int,
                params: GroupParams, rng=None) -> NNTranscript:
    """Simulate without the witness: uniform bit commitments (perfect hiding
    makes that the honest distribution), simulated bit proofs, and a0 solved
    from the aggregate equation."""
    rng = rng or secrets.SystemRandom()
    if len(bit_betas) != m:
        raise ValueError("one challenge per bit required")
    beta = beta % params.p
    bit_cms = tuple(commit(0, params.random_scalar(rng), params) for _ in range(m))
    bit_ts = tuple(
        simulate_mbs(bit_cms[i], (0, 1), bit_betas[i], params, rng) for i in range(m)
    )
    z_r = params.random_scalar(rng)
    a0 = params.group_pow(params.h, z_r)
    a0 = params.group_mul(a0, params.group_pow(c.element, beta))
    for i, cm in enumerate(bit_cms):
        a0 = params.group_mul(
            a0, params.group_inv(params.group_pow(cm.element, beta << i))
        )
    return NNTranscript(bit_cms, bit_ts, Commitment(a0), beta, z_r)
