"""The twelve acceptance criteria, each at its stated tolerance.

Run with ``pytest tests/test_acceptance.py``; a PASS/FAIL line per criterion
is printed in the terminal summary. Criterion 8's trained half reads the
checkpoint produced by scripts/train_graph.py (runs/graph4/model.npz).
"""

import itertools
import math
import random
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from apmdm import pram_suite
from apmdm.core import (ZERO, DenoiserOutput, StopCriterion, Vocab, ao_constrain, apply_transition,
                        decode, rewrite_as_apmdm, rewrite_step)
from apmdm.efasp.compose import expand, is_primitive
from apmdm.efasp.bridge import verify_source
from apmdm.efasp.evaluator import EvalContext, evaluate
from apmdm.efasp.lang import parse_program
from apmdm.model import (ModelConfig, TrainConfig, build, collate, load, n_params, neural_denoiser,
                         supervised_loss, train)
from apmdm.pram import ALU, alu, assemble, brent_bound, brent_time, init_machine, run, run_sequential, step_round
from apmdm.tasks import arm, dyck, graph as G, parity, sudoku as S
from apmdm.tasks.common import StepTuple
from conftest import RESULTS

ROOT = Path(__file__).resolve().parent.parent


@contextmanager
def criterion(k, title):
    note = {"detail": ""}
    try:
        yield note
    except BaseException:
        RESULTS[k] = (False, title, note["detail"] or "raised")
        raise
    RESULTS[k] = (True, title, note["detail"])


# ---------------------------------------------------------------- 1, 2


def per_position(x, y, c, vocab):
    """Independent interpreter of the per-position case table."""
    out = []
    for xi, yi, (r, ins, d) in zip(x, y, c):
        m = xi in vocab.mask_ids
        if m and d:
            continue
        out.append(vocab.mask if r else (yi if m else xi))
        if ins:
            out.append(vocab.id(vocab.mask_tokens[ins - 1]))
    return tuple(out)


VOCABS = [Vocab(list("abcdefg") + ["M"]), Vocab(list("abcdef") + ["M1", "M2"], ("M1", "M2"))]


def _random_instance(rng, vocab, max_len):
    n = rng.randrange(max_len + 1)
    base = vocab.base_ids
    x = tuple(rng.randrange(len(vocab)) for _ in range(n))
    y = tuple(rng.choice(base) for _ in range(n))
    codes = len(vocab.mask_tokens)
    c = tuple((rng.randrange(2), rng.randrange(codes + 1), rng.randrange(2)) for _ in range(n))
    return x, y, c


def test_c1_transition_calculus():
    with criterion(1, "transition calculus, 1e5 instances") as note:
        rng = random.Random(1)
        t0 = time.time()
        n = 100_000
        policies = ("top-prob", "top-prob-margin", "left-to-right")
        for i in range(n):
            V = VOCABS[i % 2]
            x, y, c = _random_instance(rng, V, 64)
            out = DenoiserOutput(y, c)
            nxt = apply_transition(x, out, V)
            # case table equivalence
            assert nxt == per_position(x, y, c, V)
            # length law
            dele = sum(1 for t, ci in zip(x, c) if t in V.mask_ids and ci[2])
            ins = sum(1 for t, ci in zip(x, c) if ci[1] and not (t in V.mask_ids and ci[2]))
            assert len(nxt) == len(x) - dele + ins
            # replay soundness: recorded (x, y, c) reproduces the successor
            assert apply_transition(x, out, V) == nxt
            # AO non-erasure and exact mask decrement
            conf = tuple(rng.random() for _ in x)
            k = rng.randrange(1, 9)
            ao = apply_transition(x, ao_constrain(DenoiserOutput(y, (ZERO,) * len(x), conf), x, k,
                                                  policies[i % 3], V), V)
            assert len(ao) == len(x)
            assert all(a == b for a, b in zip(x, ao) if a not in V.mask_ids)
            before = sum(t in V.mask_ids for t in x)
            assert sum(t in V.mask_ids for t in ao) == before - min(k, before)
        # trace-level replay through the decode loop
        V = VOCABS[1]

        def noisy(x, g):
            yy = tuple(int(g.choice(V.base_ids)) for _ in x)
            cc = tuple((int(g.random() < .2), int(g.integers(3)) * (g.random() < .2), int(g.random() < .5))
                       for _ in x)
            return DenoiserOutput(yy, cc)

        for s in range(1000):
            x0 = tuple(rng.randrange(len(V)) for _ in range(rng.randrange(1, 16)))
            tr = decode(noisy, x0, StopCriterion("max-steps", max_steps=5), seed=s, vocab=V)
            assert tr.replay_ok()
        took = time.time() - t0
        note["detail"] = f"{n} instances + 1000 traces in {took:.1f}s"
        assert took < 60


def test_c2_three_step_lemma():
    with criterion(2, "three-step rewrite lemma, 1e4 instances") as note:
        rng = random.Random(2)
        V = VOCABS[0]
        for _ in range(10_000):
            n = rng.randrange(33)
            x = tuple(rng.randrange(len(V)) for _ in range(n))
            y = tuple(rng.choice(V.base_ids) for _ in range(n))
            r = tuple(rng.randrange(2) for _ in range(n))
            s = x
            steps = rewrite_as_apmdm(x, y, r, V)
            assert len(steps) == 3
            for xi, out in steps:
                assert xi == s
                s = apply_transition(xi, out, V)
            assert s == rewrite_step(x, y, r)
        note["detail"] = "10000/10000 replays equal rewrite_step"


# ---------------------------------------------------------------- 3


def _wide(op, a, b, w):
    """Wide-integer reference, no masking tricks."""
    if op == "ADD":
        return (a + b) % 2**w
    if op == "SUB":
        return (a - b) % 2**w
    if op == "AND":
        return sum(2**i for i in range(w) if (a // 2**i) % 2 and (b // 2**i) % 2)
    if op == "XOR":
        return sum(2**i for i in range(w) if (a // 2**i) % 2 != (b // 2**i) % 2)
    if op == "SHL":
        return (a * 2 ** (b % w)) % 2**w
    return a // 2 ** (b % w)


def test_c3_pram():
    with criterion(3, "PRAM conformance, CREW traps, Brent, P=1") as note:
        t0 = time.time()
        w = 8
        for op in ALU:
            for a, b in itertools.product(range(256), repeat=2):
                assert alu(op, a, b, w) == _wide(op, a, b, w)
        # write conflict traps, concurrent reads do not
        _, met = run(init_machine(assemble("LOADI R3, 7\nSTORE [R3], R0\nHALT"), P=2, S=16, w=8))
        assert met.trap.kind == "write-conflict"
        _, met = run(init_machine(assemble("LOADI R3, 3\nLOAD R2, [R3]\nHALT"), P=4, S=8, w=8))
        assert met.trap is None and met.terminated
        # same-value concurrent writes still conflict
        _, met = run(init_machine(assemble("LOADI R3, 2\nSTORE [R3], R3\nHALT"), P=3, S=8, w=8))
        assert met.trap.kind == "write-conflict"
        suite = pram_suite.suite(0)
        for name, (src, want) in suite.items():
            p = assemble(src)
            m = init_machine(p)
            final, met = run(m)
            assert met.terminated and final.output == want, name
            for q in range(1, m.P + 1):
                assert brent_time(met.active, q) <= brent_bound(met.work, met.rounds, q), (name, q)
            # P = 1 against the sequential interpreter, instruction by instruction
            m1 = init_machine(p, P=1)
            hist, cur, pcs = [], m1, []
            while not cur.terminated:
                pcs.append(cur.pcs[0])
                cur = step_round(cur, hist)
                assert cur.trap is None
            mem, log = run_sequential(p, m1.mem, m1.w, list(m1.regs[0]))
            assert len(log) == len(hist)
            for pc, rec, (spc, _, regs, store) in zip(pcs, hist, log):
                assert pc == spc and tuple(rec.regs[0]) == regs and rec.stores.get(0) == store
            assert tuple(mem) == cur.mem
        took = time.time() - t0
        note["detail"] = f"{len(ALU)}x65536 ALU cases, {len(suite)} programs in {took:.1f}s"
        assert took < 120


# ---------------------------------------------------------------- 4

EV = Vocab([str(i) for i in range(10)] + ["M"])
ELEMENTWISE = ["(add (var a) (var b))", "(minus (var a) (var b))", "(multi (var a) (var b))",
               "(max (var a) (var b))", "(min (var a) (var b))", "(leq (var a) (var b))",
               "(geq (var a) (var b))", "(eq (var a) (var b))", "(lt (var a) (var b))",
               "(gt (var a) (var b))", "(and (var c) (var d))", "(or (var c) (var d))",
               "(xor (var c) (var d))", "(not (var c))", "(ite (var c) (var a) (var b))",
               "is_first", "is_last", "inv_seq_len"]
SEQUENCE = ["(seq_max (var a))", "(seq_min (var a))", "(seq_sum (var a))", "(seq_avg (var a))",
            "(seq_or (var c))", "(seq_and (var c))", "(rha (var c) (var c) PE)",
            "(rightmost_exact_match (var k) TE PE 99)"]


def _feats(rng, L):
    return {"a": rng.integers(-50, 51, L), "b": rng.integers(-50, 51, L), "c": rng.integers(0, 2, L),
            "d": rng.integers(0, 2, L), "k": rng.integers(0, 4, L)}


def _bits(v, m):
    return [(v >> i) & 1 for i in range(m)]


def test_c4_efasp():
    with criterion(4, "E-FASP dual evaluation and bitwise m=8") as note:
        rng = np.random.default_rng(4)
        L = 10_000
        ctx = EvalContext(tuple(rng.integers(0, 10, L)), EV, features=_feats(rng, L))
        for src in ELEMENTWISE:
            e = parse_program(src)
            x = expand(e)
            assert is_primitive(x)
            assert np.array_equal(evaluate(e, ctx), evaluate(x, ctx)), src
        for src in SEQUENCE:
            e = parse_program(src)
            x = expand(e)
            assert is_primitive(x)
            for _ in range(10_000):
                n = int(rng.integers(1, 13))
                c = EvalContext(tuple(rng.integers(0, 10, n)), EV, features=_feats(rng, n))
                assert np.array_equal(evaluate(e, c), evaluate(x, c)), src
        m = 8
        pairs = list(itertools.product(range(256), repeat=2))
        a = np.array([_bits(p, m) for p, _ in pairs])
        b = np.array([_bits(q, m) for _, q in pairs])
        ctx = EvalContext((0,) * len(pairs), EV, features={"a": a, "b": b})
        mods = {"bit_add": lambda p, q: (p + q) % 256, "bit_minus": lambda p, q: (p - q) % 256,
                "shift_left": lambda p, q: (p * 2**q) % 256, "shift_right": lambda p, q: p // 2**q}
        for op, f in mods.items():
            e = parse_program(f"({op} (var a 8) (var b 8))")
            got = evaluate(e, ctx)
            want = np.array([_bits(f(p, q), m) for p, q in pairs])
            assert np.array_equal(got, want), op
            assert np.array_equal(evaluate(expand(e), ctx), want), op
        note["detail"] = (f"{len(ELEMENTWISE)} elementwise ops on 1e4 positions, {len(SEQUENCE)} sequence "
                          f"ops on 1e4 contexts each, 4 bitwise ops on 65536 pairs")


# ---------------------------------------------------------------- 5, 6

SIM_SUITE = ["treesum16", "treesum64", "prefixmax8", "broadcast16"]


def test_c5_ao_simulation():
    with criterion(5, "AO symbolic decode equals PRAM output") as note:
        suite = pram_suite.suite(0)
        rows = []
        for name in SIM_SUITE:
            src, want = suite[name]
            prog = assemble(src)
            r = verify_source(src, "AO")
            rows.append(f"{name} ratio={r.ratio:.2f} ctx={r.context_tokens}/{r.budget}")
            note["detail"] = "; ".join(rows)
            assert r.match and r.blocks_ok and r.decoded_output == want, r.summary()
            assert r.decode_steps <= 4 * r.rounds
            assert r.context_tokens <= 16 * prog.procs * r.rounds


def test_c6_rewrite_simulation():
    with criterion(6, "REWRITE decode, context <= 4S, invariant in rounds") as note:
        suite = pram_suite.suite(0)
        rows = []
        for name in SIM_SUITE:
            src, want = suite[name]
            prog = assemble(src)
            r = verify_source(src, "REWRITE")
            rows.append(f"{name} ctx={r.context_tokens}/{4 * prog.memsize}")
            note["detail"] = "; ".join(rows)
            assert r.match and r.blocks_ok and r.decoded_output == want, r.summary()
            assert r.context_tokens <= 4 * prog.memsize
        short = verify_source(pram_suite.countdown(4, 2, S=16), "REWRITE")
        long = verify_source(pram_suite.countdown(21, 2, S=16), "REWRITE")
        assert short.match and long.match
        assert long.rounds >= 4 * short.rounds
        assert long.context_tokens == short.context_tokens <= 4 * 16
        rows.append(f"countdown T={short.rounds}->{long.rounds} ctx={short.context_tokens}->{long.context_tokens}")
        note["detail"] = "; ".join(rows)


# ---------------------------------------------------------------- 7


def test_c7_parity():
    with criterion(7, "parity, 1 layer d=4 on 4 tuples") as note:
        res = parity.train_model(seed=0, steps=2000)
        den = neural_denoiser(res.model, parity.VOCAB, cache=True)
        rng = np.random.default_rng(7)
        accs = {}
        for n in (2, 8, 64, 256):
            accs[n] = parity.accuracy(den, n, 1000, rng)
            note["detail"] = f"params={n_params(res.model)} " + " ".join(f"n={k}:{v:.3f}" for k, v in accs.items())
        assert all(v == 1.0 for v in accs.values())


# ---------------------------------------------------------------- 8

GRAPH_CKPT = ROOT / "runs" / "graph4b" / "model.npz"


def test_c8_graph():
    with criterion(8, "graph min-cut, oracle n=4..10 and trained n=4") as note:
        rng = random.Random(8)
        for n in range(4, 11):
            for _ in range(1000):
                g = G.random_instance(n, rng)
                tr = G.run_scripted(g)
                r = G.check_result(g, tr.final)
                assert r["optimal"] and r["removed"] == G.mincut_oracle(g), (n, g)
        note["detail"] = "oracle 7000/7000"
        if not GRAPH_CKPT.exists():
            note["detail"] += "; no trained checkpoint (run scripts/train_graph.py)"
            pytest.fail(note["detail"])
        model, _ = load(GRAPH_CKPT)
        acc = G.decode_accuracy(neural_denoiser(model, G.VOCAB), 4, 500, random.Random(20_000))
        note["detail"] += f"; trained n=4 {acc:.3f} on 500 held-out graphs"
        assert acc >= 0.99


# ---------------------------------------------------------------- 9


def test_c9_sudoku():
    with criterion(9, "sudoku oracle 100/100 and single-batch overfit") as note:
        puzzles = S.load_puzzles(ROOT / "data" / "sudoku_hard_100.txt")
        assert len(puzzles) == 100
        solved = 0
        for p in puzzles:
            tr = S.run_scripted(p)
            sol = S.solve(S.parse_puzzle(p))[0]
            solved += [S.ID_DIGIT.get(c[0]) for c in S.cells(tr.final)] == sol
        note["detail"] = f"oracle {solved}/100"
        assert solved == 100
        batch = S.sudoku_trajectory(puzzles[0]).steps[:2]  # one remask step, one unmask step
        mc = ModelConfig(len(S.VOCAB), layers=2, heads=4, d=64, max_len=S.STATE_LEN)
        tc = TrainConfig(lr=5e-3, warmup=20, batch_size=2, steps=300, log_every=50, weight_decay=0.0)
        loss = train(batch, S.VOCAB, mc, tc).final("total")
        note["detail"] += f"; overfit loss {loss:.2e}"
        assert loss < 1e-3


# ---------------------------------------------------------------- 10


def test_c10_dyck():
    with criterion(10, "Dyck k=2 samples and witnesses") as note:
        t0 = time.time()
        cfg = dyck.DyckConfig(k=2)
        rng = np.random.default_rng(10)
        bad = sum(not dyck.dyck_member(dyck.dyck_sample(cfg, rng).tokens, 2) for _ in range(10_000))
        A = dyck.brackets(2)
        members = 0
        for n in range(0, 5):
            for w in itertools.product(A, repeat=n):
                if dyck.dyck_member(w, 2):
                    tr = dyck.witness(w, 2)
                    assert tr is not None and tr.replay_ok()
                    assert dyck.make_vocab(2).names(tr.final)[1:-1] == list(w)
                    members += 1
        took = time.time() - t0
        note["detail"] = f"{10_000 - bad}/10000 samples members; {members} witnesses; {took:.1f}s"
        assert bad == 0 and took < 60


# ---------------------------------------------------------------- 11


def test_c11_sequence_lengths():
    with criterion(11, "sequence lengths at n=4 (AP-MDM ~56, TRIPLET ~932)") as note:
        rng = random.Random(11)
        trs = [G.graph_trajectory(G.random_instance(4, rng)) for _ in range(1000)]
        ap = float(np.mean([len(t.final) for t in trs]))
        av = arm.arm_vocab(G.VOCAB)
        tri = float(np.mean([len(arm.triplet_sequence(t, av)) for t in trs]))
        note["detail"] = f"AP-MDM final {ap:.1f} (band 44.8-67.2); TRIPLET {tri:.1f} (band 745.6-1118.4)"
        assert abs(ap - 56) <= 0.2 * 56
        assert abs(tri - 932) <= 0.2 * 932


# ---------------------------------------------------------------- 12


def test_c12_numerics():
    with criterion(12, "finite-difference gradients and overfit") as note:
        V = Vocab(["a", "b", "c", "M"])
        tuples = [StepTuple((0, 3, 1), (0, 2, 1), ((0, 0, 0), (0, 1, 0), (1, 0, 0))),
                  StepTuple((3, 2), (1, 2), ((0, 0, 1), (0, 2, 0)))]
        m = build(ModelConfig(len(V), layers=2, heads=2, d=8, max_len=8), seed=12).double()
        b = collate(tuples, V)

        def loss():
            lg, ct = m(b.tokens, b.keep)
            return supervised_loss(lg, ct, b)[0]

        m.zero_grad()
        loss().backward()
        worst, h = 0.0, 1e-5
        import torch

        with torch.no_grad():
            for p in m.parameters():
                flat, g = p.data.view(-1), p.grad.view(-1)
                for j in range(flat.numel()):
                    old = flat[j].item()
                    flat[j] = old + h
                    up = loss().item()
                    flat[j] = old - h
                    dn = loss().item()
                    flat[j] = old
                    fd, an = (up - dn) / (2 * h), g[j].item()
                    worst = max(worst, abs(fd - an) / max(1.0, abs(fd), abs(an)))
        note["detail"] = f"max relative gradient error {worst:.1e} over {n_params(m)} params"
        assert worst <= 1e-4
        res = train(tuples, V, ModelConfig(len(V), layers=1, heads=2, d=16, max_len=8),
                    TrainConfig(lr=1e-2, warmup=10, batch_size=2, steps=600, log_every=50))
        note["detail"] += f"; overfit loss {res.final('total'):.1e}"
        assert res.final("total") < 1e-3


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
