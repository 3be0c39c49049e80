"""Test oracles: interactive completeness, knowledge extraction, HVZK.

The extractors certify special soundness operationally (rewind, extract,
compare to the witness).  The simulators certify zero-knowledge: their
transcripts verify and are distributed like honest ones, despite taking no
Opening anywhere in their signatures.
"""

import inspect
import random

import pytest

from conftest import QueueRng
from parksense.commitments import Opening, commit
from parksense.oracles import (
    CmProver,
    MbsProver,
    NNProver,
    extract_cm_opening,
    extract_mbs,
    extract_nn,
    extract_secret,
    simulate_cm,
    simulate_mbs,
    simulate_nn,
    verify_cm_transcript,
    verify_mbs_transcript,
    verify_nn_transcript,
)
from parksense.proofs import MODE_HIDDEN, MODE_KNOWN


# -- interactive completeness ----------------------------------------------------


def test_cm_interactive_completeness_all_challenges(q23):
    rng = random.Random(1)
    for mode in (MODE_HIDDEN, MODE_KNOWN):
        x, r = 6, 9
        c = commit(x, r, q23)
        prover = CmProver(Opening(x, r), c, q23, rng=rng, mode=mode)
        for beta in range(q23.p):
            t = prover.respond(beta)
            mask = r if mode == MODE_KNOWN else None
            assert verify_cm_transcript(t, c, q23, known_mask=mask)


def test_mbs_interactive_completeness_all_challenges(q23):
    rng = random.Random(2)
    xset = (0, 1, 4)
    c = commit(4, 2, q23)
    prover = MbsProver(Opening(4, 2), c, xset, q23, rng=rng)
    for beta in range(q23.p):
        assert verify_mbs_transcript(prover.respond(beta), c, xset, q23)


def test_nn_interactive_completeness(q23):
    rng = random.Random(3)
    m = 3
    c = commit(5, 7, q23)
    prover = NNProver(Opening(5, 7), c, m, q23, rng=rng)
    for beta in range(q23.p):
        bit_betas = [(beta + i) % q23.p for i in range(m)]
        assert verify_nn_transcript(prover.respond(bit_betas, beta), c, m, q23)


def test_prover_constructors_validate(q23):
    rng = random.Random(4)
    c = commit(3, 3, q23)
    with pytest.raises(ValueError):
        CmProver(Opening(4, 3), c, q23, rng=rng)
    with pytest.raises(ValueError):
        MbsProver(Opening(3, 3), c, (0, 1), q23, rng=rng)  # 3 not in the set
    with pytest.raises(ValueError):
        NNProver(Opening(3, 3), c, 4, q23, rng=rng)  # 2^4 > 11


# -- knowledge extraction ----------------------------------------------------------


def test_cm_extraction_exact(p64):
    rng = random.Random(5)
    for trial in range(100):
        x, r = rng.randrange(p64.p), rng.randrange(p64.p)
        c = commit(x, r, p64)
        mode = MODE_HIDDEN if trial % 2 == 0 else MODE_KNOWN
        prover = CmProver(Opening(x, r), c, p64, rng=rng, mode=mode)
        b1, b2 = rng.randrange(p64.p), rng.randrange(p64.p)
        if b1 == b2:
            b2 = (b1 + 1) % p64.p
        t1, t2 = prover.respond(b1), prover.respond(b2)
        assert extract_secret(t1, t2, p64) == x
        mask = r if mode == MODE_KNOWN else None
        assert extract_cm_opening(t1, t2, p64, known_mask=mask) == Opening(x, r)


def test_extraction_requires_distinct_challenges(p64):
    rng = random.Random(6)
    c = commit(1, 2, p64)
    prover = CmProver(Opening(1, 2), c, p64, rng=rng)
    t = prover.respond(5)
    with pytest.raises(ValueError):
        extract_secret(t, prover.respond(5 + p64.p), p64)


def test_mbs_extraction_exact(q23):
    rng = random.Random(7)
    xset = (0, 1, 9)
    for _ in range(100):
        x = xset[rng.randrange(len(xset))]
        r = rng.randrange(q23.p)
        c = commit(x, r, q23)
        prover = MbsProver(Opening(x, r), c, xset, q23, rng=rng)
        b1 = rng.randrange(q23.p)
        b2 = (b1 + 1 + rng.randrange(q23.p - 1)) % q23.p
        opening = extract_mbs(prover.respond(b1), prover.respond(b2), xset, q23)
        assert opening == Opening(x, r)


def test_nn_extraction_exact(p64):
    rng = random.Random(8)
    m = 8
    for _ in range(50):
        x = rng.randrange(1 << m)
        r = rng.randrange(p64.p)
        c = commit(x, r, p64)
        prover = NNProver(Opening(x, r), c, m, p64, rng=rng)
        bit_betas = [rng.randrange(p64.p) for _ in range(m)]
        alt = [(b + 1) % p64.p for b in bit_betas]
        b1, b2 = 3, 4
        opening = extract_nn(prover.respond(bit_betas, b1), prover.respond(alt, b2), p64)
        assert opening == Opening(x, r)


# -- HVZK -------------------------------------------------------------------------


def test_simulators_take_no_witness():
    for fn in (simulate_cm, simulate_mbs, simulate_nn):
        names = set(inspect.signature(fn).parameters)
        assert "opening" not in names and "x" not in names and "r" not in names


def test_simulated_transcripts_verify(q23):
    rng = random.Random(9)
    c = commit(8, 1, q23)  # the simulator never learns this opening
    for beta in range(q23.p):
        assert verify_cm_transcript(simulate_cm(c, beta, q23, rng=rng), c, q23)
        known = simulate_cm(c, beta, q23, rng=rng, mode=MODE_KNOWN, known_mask=4)
        assert verify_cm_transcript(known, c, q23, known_mask=4)
        t = simulate_mbs(c, (0, 1, 5), beta, q23, rng=rng)
        assert verify_mbs_transcript(t, c, (0, 1, 5), q23)
        nt = simulate_nn(c, 3, [1, 2, 3], beta, q23, rng=rng)
        assert verify_nn_transcript(nt, c, 3, q23)


def _honest_cm_set(params, opening, c, beta, mode):
    """All transcripts an honest prover can emit for a fixed challenge."""
    out = set()
    if mode == MODE_KNOWN:
        for x_p in range(params.p):
            t = CmProver(opening, c, params, rng=QueueRng([x_p]), mode=mode).respond(beta)
            out.add((t.a.element, t.z_x, t.z_r))
    else:
        for x_p in range(params.p):
            for r_p in range(params.p):
                prover = CmProver(opening, c, params, rng=QueueRng([x_p, r_p]), mode=mode)
                t = prover.respond(beta)
                out.add((t.a.element, t.z_x, t.z_r))
    return out


def _simulated_cm_set(params, c, beta, mode, known_mask=None):
    out = set()
    if mode == MODE_KNOWN:
        for z_x in range(params.p):
            t = simulate_cm(c, beta, params, rng=QueueRng([z_x]), mode=mode, known_mask=known_mask)
            out.add((t.a.element, t.z_x, t.z_r))
    else:
        for z_x in range(params.p):
            for z_r in range(params.p):
                t = simulate_cm(c, beta, params, rng=QueueRng([z_x, z_r]), mode=mode)
                out.add((t.a.element, t.z_x, t.z_r))
    return out


def test_cm_hvzk_exhaustive_identity(q23):
    """Per fixed challenge, honest and simulated transcript sets coincide."""
    x, r = 6, 4
    c = commit(x, r, q23)
    for beta in (0, 1, 7):
        honest = _honest_cm_set(q23, Opening(x, r), c, beta, MODE_HIDDEN)
        simulated = _simulated_cm_set(q23, c, beta, MODE_HIDDEN)
        assert len(honest) == q23.p * q23.p
        assert honest == simulated
        honest_k = _honest_cm_set(q23, Opening(x, r), c, beta, MODE_KNOWN)
        simulated_k = _simulated_cm_set(q23, c, beta, MODE_KNOWN, known_mask=r)
        assert len(honest_k) == q23.p
        assert honest_k == simulated_k


def _mbs_coords(t):
    coords = []
    for b in t.branches:
        coords.extend((b.a.element, b.z_x, b.beta, b.z_r))
    return coords


def _marginal_tv(samples_a, samples_b):
    """Max total-variation distance across per-coordinate marginals."""
    worst = 0.0
    n = len(samples_a)
    for i in range(len(samples_a[0])):
        counts_a, counts_b = {}, {}
        for s in samples_a:
            counts_a[s[i]] = counts_a.get(s[i], 0) + 1
        for s in samples_b:
            counts_b[s[i]] = counts_b.get(s[i], 0) + 1
        keys = set(counts_a) | set(counts_b)
        tv = sum(abs(counts_a.get(k, 0) - counts_b.get(k, 0)) for k in keys) / (2 * n)
        worst = max(worst, tv)
    return worst


def test_mbs_hvzk_sampled(q23):
    rng_h = random.Random(10)
    rng_s = random.Random(11)
    x, r = 1, 5
    xset = (0, 1)
    c = commit(x, r, q23)
    beta = 6
    honest = [
        _mbs_coords(MbsProver(Opening(x, r), c, xset, q23, rng=rng_h).respond(beta))
        for _ in range(2000)
    ]
    simulated = [_mbs_coords(simulate_mbs(c, xset, beta, q23, rng=rng_s)) for _ in range(2000)]
    assert _marginal_tv(honest, simulated) <= 0.08


def test_nn_hvzk_sampled(q23):
    rng_h = random.Random(12)
    rng_s = random.Random(13)
    x, r = 5, 2
    m = 3
    c = commit(x, r, q23)
    beta, bit_betas = 9, [2, 5, 8]

    def coords(t):
        out = [cm.element for cm in t.bit_commitments]
        for bt in t.bit_transcripts:
            out.extend(_mbs_coords(bt))
        out.extend((t.a0.element, t.z_r))
        return out

    honest = [
        coords(NNProver(Opening(x, r), c, m, q23, rng=rng_h).respond(bit_betas, beta))
        for _ in range(2000)
    ]
    simulated = [
        coords(simulate_nn(c, m, bit_betas, beta, q23, rng=rng_s)) for _ in range(2000)
    ]
    assert _marginal_tv(honest, simulated) <= 0.08
