import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from apmdm.core import (ZERO, ContractError, DenoiserOutput, StopCriterion, ThreeStepRewrite, Vocab,
                        ao_constrain, apply_transition, decode, rewrite_as_apmdm, rewrite_step, zero_output)

V = Vocab(["A", "B", "C", "D", "M"])
A, B, C, D, M = V.ids("ABCDM")
V2 = Vocab(["a", "b", "M1", "M2"], mask_tokens=("M1", "M2"))


def case_table(x, y, c, vocab):
    """Per-position interpreter written from the case table, not from core."""
    out = []
    for i in range(len(x)):
        masked = x[i] in vocab.mask_ids
        remask, insert, delete = c[i]
        if masked and delete:
            case = "skip"
        elif remask:
            case = "remask"
        elif masked:
            case = "unmask"
        else:
            case = "keep"
        piece = {"skip": [], "remask": [vocab.mask], "unmask": [y[i]], "keep": [x[i]]}[case]
        if case != "skip" and insert:
            piece.append(vocab.id(vocab.mask_tokens[insert - 1]))
        out.extend(piece)
    return tuple(out)


@st.composite
def instances(draw, vocab=V, max_len=64):
    n = draw(st.integers(0, max_len))
    x = tuple(draw(st.lists(st.sampled_from(range(len(vocab))), min_size=n, max_size=n)))
    y = tuple(draw(st.lists(st.sampled_from(vocab.base_ids), min_size=n, max_size=n)))
    ins = (0, 1) if len(vocab.mask_tokens) == 1 else (0, 1, 2)
    c = tuple(draw(st.lists(st.tuples(st.sampled_from((0, 1)), st.sampled_from(ins), st.sampled_from((0, 1))),
                            min_size=n, max_size=n)))
    return x, y, c


def test_examples():
    assert apply_transition((A, M), DenoiserOutput((A, B), (ZERO, ZERO)), V) == (A, B)
    assert apply_transition((A, B), DenoiserOutput((C, D), ((1, 0, 0), (0, 1, 0))), V) == (M, B, M)
    assert apply_transition((M, A), DenoiserOutput((B, A), ((0, 0, 1), ZERO)), V) == (A,)
    assert apply_transition((A, B, C), zero_output((A, B, C), V), V) == (A, B, C)


def test_delete_suppresses_insert():
    assert apply_transition((M, A), DenoiserOutput((B, A), ((0, 1, 1), ZERO)), V) == (A,)


def test_delete_ignored_on_non_mask():
    assert apply_transition((A,), DenoiserOutput((B,), ((0, 0, 1),)), V) == (A,)


def test_contract_errors():
    with pytest.raises(ContractError):
        apply_transition((A, B), DenoiserOutput((A,), (ZERO,)), V)
    with pytest.raises(ContractError):
        apply_transition((A,), DenoiserOutput((M,), (ZERO,)), V)


def test_empty_state():
    assert apply_transition((), DenoiserOutput((), ()), V) == ()


@settings(max_examples=500, deadline=None)
@given(instances())
def test_matches_case_table(inst):
    x, y, c = inst
    assert apply_transition(x, DenoiserOutput(y, c), V) == case_table(x, y, c, V)


@settings(max_examples=300, deadline=None)
@given(instances(V2))
def test_two_masks_match_case_table(inst):
    x, y, c = inst
    assert apply_transition(x, DenoiserOutput(y, c), V2) == case_table(x, y, c, V2)


@settings(max_examples=300, deadline=None)
@given(instances())
def test_length_law(inst):
    x, y, c = inst
    out = apply_transition(x, DenoiserOutput(y, c), V)
    deleted = [V.is_mask(t) and ci[2] for t, ci in zip(x, c)]
    inserts = sum(1 for d, ci in zip(deleted, c) if not d and ci[1])
    assert len(out) == len(x) - sum(deleted) + inserts


@settings(max_examples=300, deadline=None)
@given(instances(), st.integers(1, 8), st.sampled_from(["top-prob", "top-prob-margin", "left-to-right"]))
def test_ao_non_erasure_and_mask_count(inst, k, policy):
    x, y, _ = inst
    rng = np.random.default_rng(len(x))
    conf = tuple(float(v) for v in rng.uniform(0.01, 1, len(x)))
    out = ao_constrain(DenoiserOutput(y, (ZERO,) * len(x), conf), x, k, policy, V)
    nxt = apply_transition(x, out, V)
    assert len(nxt) == len(x)
    for a, b in zip(x, nxt):
        if not V.is_mask(a):
            assert a == b
    before = sum(V.is_mask(t) for t in x)
    assert sum(V.is_mask(t) for t in nxt) == before - min(k, before)


def test_ao_examples():
    x = (M, M, M)
    out = DenoiserOutput((A, B, C), (ZERO,) * 3, (0.9, 0.2, 0.7))
    assert apply_transition(x, ao_constrain(out, x, 2, "top-prob", V), V) == (A, M, C)
    assert apply_transition(x, ao_constrain(out, x, 5, "top-prob", V), V) == (A, B, C)
    assert apply_transition(x, ao_constrain(out, x, 1, "left-to-right", V), V) == (A, M, M)
    with pytest.raises(ContractError):
        ao_constrain(out, x, 0, "top-prob", V)


def test_ao_ties_lowest_index():
    x = (M, M, M)
    out = DenoiserOutput((A, B, C), (ZERO,) * 3, (0.5, 0.5, 0.5))
    assert apply_transition(x, ao_constrain(out, x, 1, "top-prob", V), V) == (A, M, M)


def test_ao_no_masks_identity():
    x = (A, B)
    out = ao_constrain(DenoiserOutput((C, D), ((1, 1, 1),) * 2, (1.0, 1.0)), x, 1, "top-prob", V)
    assert apply_transition(x, out, V) == x


def test_rewrite_examples():
    assert rewrite_step((A, B), (C, D), (1, 0)) == (C, B)
    assert rewrite_step((A, B), (C, D), (0, 0)) == (A, B)
    states = [(A, B)]
    for xi, out in rewrite_as_apmdm((A, B), (C, A), (1, 0), V):
        assert xi == states[-1]
        states.append(apply_transition(xi, out, V))
    assert states == [(A, B), (A, M, B, M), (M, C, M, B), (C, B)]


def test_rewrite_empty():
    steps = rewrite_as_apmdm((), (), (), V)
    assert len(steps) == 3
    assert all(x == () for x, _ in steps)


@st.composite
def rewrite_instances(draw, max_len=32):
    n = draw(st.integers(0, max_len))
    x = tuple(draw(st.lists(st.sampled_from(range(len(V))), min_size=n, max_size=n)))
    y = tuple(draw(st.lists(st.sampled_from(V.base_ids), min_size=n, max_size=n)))
    r = tuple(draw(st.lists(st.sampled_from((0, 1)), min_size=n, max_size=n)))
    return x, y, r


@settings(max_examples=500, deadline=None)
@given(rewrite_instances())
def test_three_step_lemma(inst):
    x, y, r = inst
    s = x
    for xi, out in rewrite_as_apmdm(x, y, r, V):
        assert xi == s
        s = apply_transition(xi, out, V)
    assert s == rewrite_step(x, y, r)


def test_three_step_runner_under_decode():
    def inner(x, rng=None):
        y = tuple(B if t == A else (A if V.is_mask(t) else t) for t in x)
        return DenoiserOutput(y, tuple((1, 0, 0) if t in (A, M) else ZERO for t in x))

    x0 = (A, C, M, A)
    den = ThreeStepRewrite(inner, len(x0), V)
    tr = decode(den, x0, StopCriterion("max-steps", max_steps=3), seed=0, vocab=V)
    assert tr.final == rewrite_step(x0, inner(x0).y, [c[0] for c in inner(x0).controls])


def _identity(x, rng=None):
    return zero_output(x, V)


def test_decode_fixpoint_one_step():
    tr = decode(_identity, (A, B), StopCriterion(), seed=0, vocab=V)
    assert len(tr) == 1 and tr.final == (A, B) and tr.stop_reason == "fixpoint"


def test_decode_truncation_flagged():
    def grow(x, rng=None):
        return DenoiserOutput(zero_output(x, V).y, ((0, 1, 0),) + (ZERO,) * (len(x) - 1))

    tr = decode(grow, (A,), StopCriterion("fixpoint", max_steps=5), seed=0, vocab=V)
    assert tr.truncated and len(tr.final) == 6


def test_decode_stops():
    def fill(x, rng=None):
        return DenoiserOutput(tuple(D if V.is_mask(t) else t for t in x), (ZERO,) * len(x))

    tr = decode(fill, (M, M), StopCriterion("all-unmasked", max_steps=4), seed=0, vocab=V)
    assert tr.stop_reason == "all-unmasked" and tr.final == (D, D)
    tr = decode(fill, (M,), StopCriterion("end-token", "D", 4), seed=0, vocab=V)
    assert tr.stop_reason == "end-token"
    with pytest.raises(ContractError):
        StopCriterion("max-steps", max_steps=0)
    with pytest.raises(ContractError):
        decode(fill, (), StopCriterion(), seed=0, vocab=V)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.lists(st.sampled_from(range(5)), min_size=1, max_size=12))
def test_decode_replay_and_determinism(seed, x0):
    def noisy(x, rng):
        y = tuple(int(rng.choice(V.base_ids)) if V.is_mask(t) else t for t in x)
        c = tuple((int(rng.random() < .2), int(rng.random() < .2), int(rng.random() < .5)) for _ in x)
        return DenoiserOutput(y, c)

    stop = StopCriterion("max-steps", max_steps=6)
    a = decode(noisy, tuple(x0), stop, seed=seed, vocab=V)
    b = decode(noisy, tuple(x0), stop, seed=seed, vocab=V)
    assert a.states == b.states
    assert a.replay_ok()


def test_trace_jsonl_fields():
    import json

    tr = decode(_identity, (A, M), StopCriterion(), seed=0, vocab=V)
    recs = [json.loads(line) for line in tr.to_jsonl().splitlines()]
    assert set(recs[0]) >= {"step", "x", "y", "c"}
    assert recs[-1]["stop_reason"] == "fixpoint"


def test_vocab_contract():
    with pytest.raises(ContractError):
        Vocab(["a", "a", "M"])
    with pytest.raises(ContractError):
        Vocab(["a", "b"])
    assert V.names(V.ids(["A", "M"])) == ["A", "M"]
