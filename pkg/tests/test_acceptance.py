"""Acceptance gate: the eleven shipping criteria, one test and one line each.

Every test funnels through _report, which records a `criterion NN: PASS/FAIL`
line for the terminal summary (see conftest) and then asserts.  Tolerances
are pinned here and nowhere else; a criterion that cannot hold on this
implementation stays red rather than being weakened.
"""

import random
import time

import pytest

from conftest import ACCEPTANCE_LINES, QueueRng
from parksense.bench import run_confirm_bench, run_stage_bench
from parksense.blur import blurriness, from_rows
from parksense.client import Client
from parksense.commitments import Commitment, Opening, combine, commit, verify_opening
from parksense.groups import gen_params
from parksense.oracles import (
    CmProver,
    MbsProver,
    NNProver,
    extract_cm_opening,
    extract_mbs,
    extract_nn,
    simulate_cm,
    simulate_mbs,
    simulate_nn,
)
from parksense.proofs import (
    MODE_HIDDEN,
    MODE_KNOWN,
    prove_cm,
    prove_link,
    prove_mbs,
    prove_nn,
    verify_cm,
    verify_mbs,
    verify_nn,
)
from parksense.protocol import Rejection, claim_context, ticket_mask
from parksense.server import Server

NOW = 1000


def _report(n: int, ok: bool, detail: str) -> None:
    line = "criterion %02d: %s - %s" % (n, "PASS" if ok else "FAIL", detail)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def _register(server, seed):
    client = Client(server.bundle(), rng=random.Random(seed))
    client.register_with(server)
    return client


# -- 1: completeness ---------------------------------------------------------------


def test_criterion_01_zkp_completeness(p64):
    rng = random.Random(101)
    started = time.perf_counter()
    good = total = 0

    def check(ok):
        nonlocal good, total
        total += 1
        good += bool(ok)

    for i in range(1000):  # zkpCm, alternating mask modes
        x, r = rng.randrange(p64.p), rng.randrange(p64.p)
        c = commit(x, r, p64)
        ctx = b"acc1-cm-%d" % i
        if i % 2 == 0:
            proof = prove_cm(Opening(x, r), c, ctx, p64, rng=rng)
            check(verify_cm(proof, c, ctx, p64))
        else:
            proof = prove_cm(Opening(x, r), c, ctx, p64, rng=rng, mode=MODE_KNOWN)
            check(verify_cm(proof, c, ctx, p64, known_mask=r))
    for i in range(1000):  # zkpMbs, set sizes 2 and 5
        if i % 2 == 0:
            xset = (0, 1)
        else:
            base = rng.randrange(p64.p - 5)
            xset = tuple(base + k for k in range(5))
        x = xset[rng.randrange(len(xset))]
        r = rng.randrange(p64.p)
        c = commit(x, r, p64)
        ctx = b"acc1-mbs-%d" % i
        check(verify_mbs(prove_mbs(Opening(x, r), c, xset, ctx, p64, rng=rng), c, xset, ctx, p64))
    for i in range(1000):  # zkpNN, widths 8 and 32
        m = 8 if i % 2 == 0 else 32
        x = rng.randrange(1 << m)
        r = rng.randrange(p64.p)
        c = commit(x, r, p64)
        ctx = b"acc1-nn-%d" % i
        check(verify_nn(prove_nn(Opening(x, r), c, m, ctx, p64, rng=rng), c, m, ctx, p64))

    elapsed = time.perf_counter() - started
    _report(
        1,
        good == total == 3000 and elapsed < 60.0,
        "%d/%d proofs verified in %.1fs (budget 60s)" % (good, total, elapsed),
    )


# -- 2: special soundness ------------------------------------------------------------


def test_criterion_02_knowledge_extraction(p64):
    rng = random.Random(102)
    exact = {"cm": 0, "mbs": 0, "nn": 0}

    for trial in range(500):
        x, r = rng.randrange(p64.p), rng.randrange(p64.p)
        c = commit(x, r, p64)
        mode = MODE_HIDDEN if trial % 2 == 0 else MODE_KNOWN
        prover = CmProver(Opening(x, r), c, p64, rng=rng, mode=mode)
        b1 = rng.randrange(p64.p)
        b2 = (b1 + 1 + rng.randrange(p64.p - 1)) % p64.p
        t1, t2 = prover.respond(b1), prover.respond(b2)
        mask = r if mode == MODE_KNOWN else None
        if extract_cm_opening(t1, t2, p64, known_mask=mask) == Opening(x, r):
            exact["cm"] += 1

    xset = (0, 1, 5, 17, 100)
    for trial in range(500):
        x = xset[rng.randrange(len(xset))]
        r = rng.randrange(p64.p)
        c = commit(x, r, p64)
        prover = MbsProver(Opening(x, r), c, xset, p64, rng=rng)
        b1 = rng.randrange(p64.p)
        b2 = (b1 + 1 + rng.randrange(p64.p - 1)) % p64.p
        if extract_mbs(prover.respond(b1), prover.respond(b2), xset, p64) == Opening(x, r):
            exact["mbs"] += 1

    m = 8
    for trial in range(500):
        x = rng.randrange(1 << m)
        r = rng.randrange(p64.p)
        c = commit(x, r, p64)
        prover = NNProver(Opening(x, r), c, m, p64, rng=rng)
        betas1 = [rng.randrange(p64.p) for _ in range(m)]
        betas2 = [(b + 1) % p64.p for b in betas1]
        t1 = prover.respond(betas1, 3)
        t2 = prover.respond(betas2, 4)
        if extract_nn(t1, t2, p64) == Opening(x, r):
            exact["nn"] += 1

    _report(
        2,
        all(v == 500 for v in exact.values()),
        "exact witnesses: cm %d/500, mbs %d/500, nn %d/500"
        % (exact["cm"], exact["mbs"], exact["nn"]),
    )


# -- 3: HVZK --------------------------------------------------------------------------


def _cm_transcript_sets(q23, beta):
    x, r = 6, 4
    c = commit(x, r, q23)
    hidden_honest, hidden_sim = set(), set()
    for x_p in range(q23.p):
        for r_p in range(q23.p):
            t = CmProver(Opening(x, r), c, q23, rng=QueueRng([x_p, r_p])).respond(beta)
            hidden_honest.add((t.a.element, t.z_x, t.z_r))
            s = simulate_cm(c, beta, q23, rng=QueueRng([x_p, r_p]))
            hidden_sim.add((s.a.element, s.z_x, s.z_r))
    known_honest, known_sim = set(), set()
    for x_p in range(q23.p):
        t = CmProver(Opening(x, r), c, q23, rng=QueueRng([x_p]), mode=MODE_KNOWN).respond(beta)
        known_honest.add((t.a.element, t.z_x, t.z_r))
        s = simulate_cm(c, beta, q23, rng=QueueRng([x_p]), mode=MODE_KNOWN, known_mask=r)
        known_sim.add((s.a.element, s.z_x, s.z_r))
    return hidden_honest, hidden_sim, known_honest, known_sim


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


def test_criterion_03_hvzk(q23):
    identical = True
    for beta in (0, 1, 7):
        hh, hs, kh, ks = _cm_transcript_sets(q23, beta)
        identical = identical and hh == hs and kh == ks
        identical = identical and len(hh) == q23.p * q23.p and len(kh) == q23.p

    n = 10_000
    rng_h, rng_s = random.Random(103), random.Random(203)
    x, r, xset, beta = 1, 5, (0, 1), 6
    c = commit(x, r, q23)
    honest = [
        _mbs_coords(MbsProver(Opening(x, r), c, xset, q23, rng=rng_h).respond(beta))
        for _ in range(n)
    ]
    simulated = [_mbs_coords(simulate_mbs(c, xset, beta, q23, rng=rng_s)) for _ in range(n)]
    tv_mbs = _marginal_tv(honest, simulated)

    x, r, m = 5, 2, 3
    c = commit(x, r, q23)
    beta, bit_betas = 9, [2, 5, 8]

    def nn_coords(t):
        out = [cm.element for cm in t.bit_commitments]
        for bt in t.bit_transcripts:
            out.extend(_mbs_coords(bt))
        out.extend((t.a0.element, t.z_r))
        return out

    honest = [
        nn_coords(NNProver(Opening(x, r), c, m, q23, rng=rng_h).respond(bit_betas, beta))
        for _ in range(n)
    ]
    simulated = [
        nn_coords(simulate_nn(c, m, bit_betas, beta, q23, rng=rng_s)) for _ in range(n)
    ]
    tv_nn = _marginal_tv(honest, simulated)

    _report(
        3,
        identical and tv_mbs <= 0.05 and tv_nn <= 0.05,
        "cm transcript sets identical; marginal TV mbs %.4f, nn %.4f (cap 0.05)"
        % (tv_mbs, tv_nn),
    )


# -- 4: homomorphism ------------------------------------------------------------------


def test_criterion_04_pedersen_homomorphism(p64):
    rng = random.Random(104)
    bad = 0
    for _ in range(10_000):
        x1, r1, x2, r2 = (rng.randrange(p64.p) for _ in range(4))
        lhs = combine(commit(x1, r1, p64), commit(x2, r2, p64), p64)
        rhs = commit(p64.scalar_add(x1, x2), p64.scalar_add(r1, r2), p64)
        bad += lhs != rhs
    _report(4, bad == 0, "10000/10000 random quadruples multiply exactly")


# -- 5: cheating prevention ------------------------------------------------------------


def test_criterion_05_cheating_prevention(config64):
    trials = 100
    hits = dict.fromkeys(
        ("duplicate", "double-claim", "q-reuse", "balance", "tamper"), 0
    )

    def expect(fn, stage, reason):
        try:
            fn()
        except Rejection as rej:
            return (rej.stage, rej.reason) == (stage, reason)
        return False

    p = config64.params
    with Server(config64) as srv:
        earner = _register(srv, 50)
        broke = _register(srv, 51)

        for i in range(trials):
            j = "dup-%03d" % i
            entry, proof = earner.make_submission(j, NOW, 1)
            srv.handle_submission(entry, proof, now=NOW)
            hits["duplicate"] += expect(
                lambda: srv.handle_submission(entry, proof, now=NOW), "submit", "duplicate"
            )

        for i in range(trials):
            j = "dbl-%03d" % i
            earner.submit_to(srv, j, NOW, 1, now=NOW)
            ticket = earner._pending[(j, NOW)]
            earner.run_claim(srv, j, NOW)
            earner._pending[(j, NOW)] = ticket
            hits["double-claim"] += expect(
                lambda: earner.run_claim(srv, j, NOW), "claim-open", "no-credit"
            )

        for i in range(trials):
            ja, jb = "qa-%03d" % i, "qb-%03d" % i
            earner.submit_to(srv, ja, NOW, 1, now=NOW)
            earner.submit_to(srv, jb, NOW, 1, now=NOW)
            old_sec, old_pub = earner.credential_secret, earner.credential_public
            earner.run_claim(srv, ja, NOW)  # spends old_sec.q
            nonce = "%032x" % (0xACC5 + i)
            ticket = commit(old_sec.s, ticket_mask(jb, NOW, p), p)
            link = prove_link(
                Opening(old_sec.s, old_sec.r_s), old_pub.cm_s, ticket,
                ticket_mask(jb, NOW, p), claim_context(p, jb, NOW, nonce), p,
            )
            srv.claim_open(nonce, jb, NOW, ticket, old_pub, link)
            hits["q-reuse"] += expect(
                lambda: srv.claim_reveal(nonce, old_sec.q, old_sec.r_q),
                "claim-reveal", "identifier-spent",
            )
            earner.run_claim(srv, jb, NOW)  # leave no pending state behind

        for _ in range(trials):  # b0 = 0, so any inquiry is over-budget
            hits["balance"] += expect(
                lambda: broke.run_inquiry(srv, ["dup-000"]),
                "inquire-open", "insufficient-balance",
            )

        for i in range(trials):
            j = "tam-%03d" % i
            entry, proof = broke.make_submission(j, NOW, 1)
            forged = type(proof)(proof.a, (proof.z_x + 1) % p.p, proof.z_r, proof.mode)
            hits["tamper"] += expect(
                lambda: srv.handle_submission(entry, forged, now=NOW), "submit", "bad-proof"
            )

    _report(
        5,
        all(v == trials for v in hits.values()),
        "rejected with exact stage+reason: " +
        ", ".join("%s %d/%d" % (k, v, trials) for k, v in hits.items()),
    )


# -- 6: incentive correctness -----------------------------------------------------------


def test_criterion_06_majority_vote_credits(config64):
    with Server(config64) as srv:
        a, b, c = (_register(srv, 60 + i) for i in range(3))
        for client, vote in zip((a, b, c), (1, 1, 0)):
            client.submit_to(srv, "inc-a", NOW, vote, now=NOW)
        issued = a.run_claim(srv, "inc-a", NOW) + b.run_claim(srv, "inc-a", NOW)
        minority_rejected = False
        try:
            c.run_claim(srv, "inc-a", NOW)
        except Rejection as rej:
            minority_rejected = rej.reason == "no-credit"

        for client, vote in zip((a, b), (1, 0)):
            client.submit_to(srv, "inc-b", NOW, vote, now=NOW)
        tie_credits = 0
        for client in (a, b):
            try:
                tie_credits += client.run_claim(srv, "inc-b", NOW)
            except Rejection:
                pass
        tie_status = srv.availability(["inc-b"])[0]

    _report(
        6,
        issued == 2 and minority_rejected and tie_credits == 0 and tie_status == "unconfirmed",
        "votes {1,1,0}: %d credits, dissenter refused; votes {1,0}: %d credits, status %s"
        % (issued, tie_credits, tie_status),
    )


# -- 7: balance conservation --------------------------------------------------------------


def test_criterion_07_balance_conservation(config64):
    rng = random.Random(107)
    with Server(config64) as srv:
        client = _register(srv, 70)
        credits = inquiries = 0
        space = 0
        for _ in range(200):
            if client.balance >= config64.c_q and rng.random() < 0.4:
                client.run_inquiry(srv, ["conv-%04d" % rng.randrange(space + 1)])
                inquiries += 1
            else:
                j = "conv-%04d" % space
                space += 1
                client.submit_to(srv, j, NOW, 1, now=NOW)
                credits += client.run_claim(srv, j, NOW)
        expected = config64.b0 + credits - config64.c_q * inquiries
        sec, pub = client.credential_secret, client.credential_public
        opened = verify_opening(pub.cm_b, Opening(expected, sec.r_b), config64.params)
    _report(
        7,
        opened and client.balance == expected,
        "after 200 actions balance %d == %d + %d - %d*%d, commitment opens exactly"
        % (client.balance, config64.b0, credits, config64.c_q, inquiries),
    )


# -- 8: confirmation-time scaling ------------------------------------------------------------


def test_criterion_08_confirmation_scaling():
    res = run_confirm_bench(rep_budget=900, seed=1)
    xs = res["user_counts"]
    ordered = all(res["distinct"][u] >= res["same"][u] for u in xs)
    fits = (
        res["same_slope"] > 0
        and res["distinct_slope"] > 0
        and res["same_r2"] >= 0.9
        and res["distinct_r2"] >= 0.9
    )
    _report(
        8,
        ordered and fits,
        "slope same %.3g (r2 %.3f), distinct %.3g (r2 %.3f); distinct>=same at U=%s"
        % (
            res["same_slope"], res["same_r2"],
            res["distinct_slope"], res["distinct_r2"],
            ",".join(str(u) for u in xs) if ordered else "VIOLATED",
        ),
    )


# -- 9: overhead ordering ----------------------------------------------------------------------


def test_criterion_09_overhead_ordering():
    metrics, _rows = run_stage_bench(reps=3, seed=1)
    nbytes = {m.stage: m.user_bytes for m in metrics}
    sub, reg = nbytes["submission"], nbytes["registration"]
    inq, clm = nbytes["inquiry"], nbytes["claim"]
    ok = sub < reg < inq <= clm
    _report(
        9,
        ok,
        "bytes submission %d < registration %d < inquiry %d <= claim %d %s"
        % (sub, reg, inq, clm, "holds" if ok else "does NOT hold"),
    )


# -- 10: blurriness metric ------------------------------------------------------------------------


def test_criterion_10_blur_goldens():
    sharp = from_rows([[10, 0], [0, 0]])
    same = blurriness(sharp, sharp)
    gone = blurriness(sharp, from_rows([[4, 4], [4, 4]]))
    softer = blurriness(sharp, from_rows([[6, 2], [2, 2]]))
    _report(
        10,
        (same, gone, softer) == (0.0, 1.0, 0.6),
        "tagged grids give %r, %r, %r (want 0.0, 1.0, 0.6 exactly)" % (same, gone, softer),
    )


# -- 11: group axioms and serialization -------------------------------------------------------------


def test_criterion_11_axioms_and_serialization(q23, p64):
    failures = 0

    sub = sorted({pow(q23.g, k, q23.q) for k in range(q23.p)})
    failures += len(sub) != q23.p
    for a in sub:
        failures += not q23.is_element(a)
        failures += q23.group_mul(a, q23.group_inv(a)) != 1
        failures += q23.decode_element(q23.encode_element(a)) != a
        for b in sub:
            ab = q23.group_mul(a, b)
            failures += ab not in sub
            for c in sub:
                failures += q23.group_mul(ab, c) != q23.group_mul(a, q23.group_mul(b, c))
    for x in range(q23.p):
        failures += q23.decode_scalar(q23.encode_scalar(x)) != x
        failures += q23.scalar_add(x, q23.scalar_neg(x)) != 0
        if x:
            failures += q23.scalar_mul(x, q23.scalar_inv(x)) != 1

    rng = random.Random(111)
    for _ in range(500):
        a = p64.group_pow(p64.g, rng.randrange(p64.p))
        b = p64.group_pow(p64.h, rng.randrange(p64.p))
        c = p64.group_pow(p64.g, rng.randrange(p64.p))
        failures += p64.group_mul(p64.group_mul(a, b), c) != p64.group_mul(
            a, p64.group_mul(b, c)
        )
        failures += p64.group_mul(a, p64.group_inv(a)) != 1
        failures += not p64.is_element(a)
        failures += p64.decode_element(p64.encode_element(a)) != a
        x = rng.randrange(p64.p)
        failures += p64.decode_scalar(p64.encode_scalar(x)) != x
    _report(11, failures == 0, "%d axiom/serialization failures" % failures)
