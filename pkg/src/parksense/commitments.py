"""Pedersen commitments Cm(x, r) = g^x * h^r with homomorphic combination.

Commitments carry no reference to their params; callers supply params
contextually and the wire layer binds a params fingerprint per session.
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass

from .groups import GroupParams


@dataclass(frozen=True)
class Commitment:
    element: int


@dataclass(frozen=True)
class Opening:
    x: int
    r: int


def commit(x: int, r: int, params: GroupParams) -> Commitment:
    value = params.group_mul(params.group_pow(params.g, x), params.group_pow(params.h, r))
    return Commitment(value)


def commit_random(x: int, params: GroupParams, rng=None) -> tuple[Commitment, Opening]:
    """Commit to x under a uniformly random mask; returns the full opening."""
    rng = rng or secrets.SystemRandom()
    r = params.random_scalar(rng)
    return commit(x, r, params), Opening(x % params.p, r)


def verify_opening(c: Commitment, o: Opening, params: GroupParams) -> bool:
    return commit(o.x, o.r, params) == c


def combine(c1: Commitment, c2: Commitment, params: GroupParams) -> Commitment:
    """Homomorphic product: commits to the sum of values and masks."""
    return Commitment(params.group_mul(c1.element, c2.element))


def shift(c: Commitment, delta: int, params: GroupParams) -> Commitment:
    """Add the public constant delta to the committed value, mask unchanged.

    Negative deltas are accepted and reduce mod p, realizing Cm(-c_q, 0).
    """
    return combine(c, commit(delta, 0, params), params)
