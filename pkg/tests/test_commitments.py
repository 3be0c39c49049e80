"""Pedersen commitments: exhaustive at q = 23, randomized homomorphism."""

import random

import pytest

from parksense.commitments import (
    Commitment,
    Opening,
    combine,
    commit,
    commit_random,
    shift,
    verify_opening,
)


def test_commit_matches_definition_exhaustive(q23):
    for x in range(q23.p):
        for r in range(q23.p):
            expected = q23.group_mul(q23.group_pow(q23.g, x), q23.group_pow(q23.h, r))
            assert commit(x, r, q23).element == expected


def test_opening_exhaustive(q23):
    for x in range(q23.p):
        for r in range(q23.p):
            c = commit(x, r, q23)
            assert verify_opening(c, Opening(x, r), q23)
            assert not verify_opening(c, Opening((x + 1) % q23.p, r), q23)


def test_negative_and_large_inputs_reduce(q23):
    assert commit(-1, 3, q23) == commit(q23.p - 1, 3, q23)
    assert commit(q23.p + 2, q23.p + 5, q23) == commit(2, 5, q23)


def test_homomorphism_randomized(p64):
    rng = random.Random(4242)
    p = p64.p
    for _ in range(1000):
        x1, r1, x2, r2 = (rng.randrange(p) for _ in range(4))
        lhs = combine(commit(x1, r1, p64), commit(x2, r2, p64), p64)
        assert lhs == commit((x1 + x2) % p, (r1 + r2) % p, p64)


def test_shift_exhaustive(q23):
    for x in range(q23.p):
        for r in range(q23.p):
            c = commit(x, r, q23)
            for delta in range(-3, 4):
                assert shift(c, delta, q23) == commit(x + delta, r, q23)


def test_shift_randomized(p64):
    rng = random.Random(7)
    for _ in range(100):
        x, r = rng.randrange(p64.p), rng.randrange(p64.p)
        delta = rng.randrange(-1000, 1000)
        assert shift(commit(x, r, p64), delta, p64) == commit(x + delta, r, p64)


def test_commit_random(p64):
    rng = random.Random(99)
    c, opening = commit_random(17, p64, rng)
    assert opening.x == 17
    assert verify_opening(c, opening, p64)


def test_perfect_hiding_exhaustive(q23):
    """Over all masks, Cm(x, .) sweeps the whole subgroup for every x."""
    full = {commit(0, r, q23).element for r in range(q23.p)}
    assert len(full) == q23.p
    for x in range(q23.p):
        assert {commit(x, r, q23).element for r in range(q23.p)} == full


def test_commitment_equality_semantics(q23):
    assert Commitment(4) == Commitment(4)
    assert Commitment(4) != Commitment(9)
