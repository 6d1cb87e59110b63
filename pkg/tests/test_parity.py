import itertools

from hypothesis import given, settings, strategies as st

from apmdm.core import StopCriterion, decode
from apmdm.tasks import parity as P
from apmdm.tasks.common import read_jsonl, write_jsonl

V = P.VOCAB


def names(x):
    return " ".join(V.names(x))


def test_example_101():
    tr = P.parity_trajectory([1, 0, 1])
    assert [names(x) for x in tr.states()] == [
        "BOS 1 0 1 EOS", "BOS 1 M 1 EOS", "BOS 1 1 EOS", "BOS M M EOS", "BOS EOS"]
    assert tr.meta["parity"] == 0


def test_empty_is_even():
    tr = P.parity_trajectory([])
    assert len(tr) == 0 and P.result(tr.final) == 0


def test_steps_alternate_remask_delete():
    tr = P.parity_trajectory([1, 1, 0, 1, 0, 0, 1])
    for k, s in enumerate(tr.steps):
        kinds = {i for c in s.c for i, b in enumerate(c) if b}
        assert kinds == ({0} if k % 2 == 0 else {2})


def test_exhaustive_up_to_20():
    # exhaustive over lengths <= 12, sampled beyond to keep the suite quick
    for n in range(13):
        for bits in itertools.product((0, 1), repeat=n):
            x = P.run_scripted(bits).final
            assert P.result(x) == sum(bits) % 2


@settings(max_examples=300, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=13, max_size=20))
def test_long_inputs(bits):
    tr = P.parity_trajectory(bits)
    assert tr.replay_ok()
    assert P.result(tr.final) == sum(bits) % 2


def test_canonical_tuples():
    ts = P.canonical_tuples()
    assert len(ts) == 4
    pats = {tuple(V.names(t.x)) for t in ts}
    assert ("BOS", "0", "0") in pats and ("BOS", "1", "1") in pats
    assert any("M" in p for p in pats)


def test_reachable_windows():
    ws = P.reachable_windows()
    assert all(len(w) <= P.WINDOW for w in ws)
    assert (P.BOS, P.EOS) in ws and len(ws) == 11


def test_decode_example():
    tr = decode(P.scripted_denoiser, P.encode([1, 0, 1]), StopCriterion(), seed=0, vocab=V)
    assert names(tr.final) == "BOS EOS"


def test_jsonl_roundtrip(tmp_path):
    trs = [P.parity_trajectory(b) for b in ([1, 0, 1], [1, 1, 1, 0])]
    path = tmp_path / "p.jsonl"
    write_jsonl(path, trs)
    back = read_jsonl(path, V)
    assert [t.steps for t in back] == [t.steps for t in trs]
    assert all(t.replay_ok() for t in back)
