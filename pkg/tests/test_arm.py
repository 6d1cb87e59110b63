import random

import pytest
from hypothesis import given, settings, strategies as st

from apmdm.core import ContractError, DenoiserOutput, Vocab, apply_transition
from apmdm.tasks import arm, graph as G, parity
from apmdm.tasks.common import Recorder, Trajectory

V = Vocab(["0", "1", "2", "SEP", "M"])


def ao_trajectory(inp, n_out, order):
    """Unmask-only trajectory filling the n_out masks in the given order, one per step."""
    x0 = V.ids(inp) + (V.mask,) * n_out
    rec = Recorder("toy", V, x0)
    for j in order:
        i = len(inp) + j
        y = tuple(V.id("2") if k == i else (t if not V.is_mask(t) else V.id("0")) for k, t in enumerate(rec.x))
        c = tuple((1, 0, 0) if V.is_mask(t) and k != i else (0, 0, 0) for k, t in enumerate(rec.x))
        rec.step(y, c)
    return rec.tr


def test_pair_length_formula():
    # input of n tokens with SEP, S = n + 1 + outputs; length 2S - n - 1
    tr = Trajectory("toy", V, [], V.ids(["1", "0", "SEP", "M", "M", "M"]))
    seq = arm.pair_sequence(tr)
    assert len(seq) == 9


def test_pair_empty_trajectory():
    tr = Trajectory("toy", V, [], V.ids(["1", "SEP", "M"]))
    av = arm.arm_vocab(V)
    seq = arm.pair_sequence(tr, av)
    assert av.names(seq) == ["1", "SEP", "M", "M"]


def test_pair_rejects_remask_free_edits():
    tr = parity.parity_trajectory([1, 0])
    with pytest.raises(ContractError):
        arm.pair_sequence(tr)


def test_pair_records_unmask_events():
    inp = ["1", "0", "SEP"]
    # masks kept by the remask bit are not edits; the unmask order is recorded
    tr = ao_trajectory(inp, 3, [2, 0, 1])
    av = arm.arm_vocab(V)
    names = av.names(arm.pair_sequence(tr, av))
    assert names[:3] == inp
    assert names[3:] == ["POSE5", "2", "POSE3", "2", "POSE4", "2"]


def test_triplet_layout():
    tr = parity.parity_trajectory([1, 0])
    av = arm.arm_vocab(tr.vocab)
    names = av.names(arm.triplet_sequence(tr, av))
    assert names[:4] == ["BOS", "1", "0", "EOS"]
    assert names[4:8] == ["STEP", "POSE2", "REMASK", "NONE"]
    assert names[-4:] == ["ANSWER", "BOS", "1", "EOS"]


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 1), max_size=12))
def test_triplet_replay_parity(bits):
    tr = parity.parity_trajectory(bits)
    seq = arm.triplet_sequence(tr)
    assert arm.triplet_replay(seq, tr.vocab) == tr.final


def test_triplet_replay_random_edits():
    rng = random.Random(0)
    for _ in range(1000):
        x = tuple(rng.choice(range(5)) for _ in range(rng.randrange(1, 10)))
        rec = Recorder("toy", V, x)
        for _ in range(rng.randrange(1, 4)):
            y = tuple(rng.choice(V.base_ids) for _ in rec.x)
            c = tuple((rng.randrange(2), rng.randrange(2), rng.randrange(2)) for _ in rec.x)
            rec.step(y, c)
        tr = rec.tr
        assert arm.triplet_replay(arm.triplet_sequence(tr), V) == tr.final


def test_triplet_graph_replay():
    rng = random.Random(1)
    for _ in range(20):
        tr = G.graph_trajectory(G.random_instance(4, rng))
        assert arm.triplet_replay(arm.triplet_sequence(tr), G.VOCAB) == tr.final


def test_unknown_format():
    with pytest.raises(ContractError):
        arm.arm_sequentialize(parity.parity_trajectory([1]), "QUAD")
