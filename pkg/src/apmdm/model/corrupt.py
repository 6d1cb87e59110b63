"""Self-supervised corruptions that manufacture labels for each head."""

from __future__ import annotations

import numpy as np

from ..core import ContractError, Vocab
from .config import CorruptionSpec


def _check_clean(x, vocab: Vocab):
    if any(vocab.is_mask(t) for t in x):
        raise ContractError("clean sequence contains a mask")


def unmask_forward(x, alpha: float, rng: np.random.Generator, vocab: Vocab):
    """Keep each token with probability alpha; masked positions get targets."""
    x = list(x)
    hide = rng.random(len(x)) >= alpha if x else np.zeros(0, bool)
    out = [vocab.mask if h else t for t, h in zip(x, hide)]
    return out, {"target": x, "masked": [bool(h) for h in hide]}


def insert_deflate(x, delta: float, rng: np.random.Generator, vocab: Vocab):
    """Drop tokens with probability delta; label 1 where the successor was dropped."""
    drop = rng.random(len(x)) < delta
    out, lab = [], []
    for i, t in enumerate(x):
        if drop[i]:
            if lab:
                lab[-1] = 1
            continue
        out.append(t)
        lab.append(0)
    return out, {"insert": lab}


def delete_inflate(x, alpha: float, gamma: float, rng: np.random.Generator, vocab: Vocab):
    """Mask by alpha, then insert extra masks with probability gamma; those get label 1."""
    masked, info = unmask_forward(x, alpha, rng, vocab)
    out, lab = [], []
    for t in masked:
        out.append(t)
        lab.append(0)
        if rng.random() < gamma:
            out.append(vocab.mask)
            lab.append(1)
    return out, {"delete": lab, "first_stage": masked}


def remask_shuffle(batch, delta: float, seed: int, vocab: Vocab):
    """Swap tokens in from another batch member; label 1 where the token changed.

    batch is a list of (sample_id, tokens). Donors and positions come from a
    per-sample generator over the id-sorted batch, so reordering the batch
    leaves every sample's result unchanged.
    """
    canon = sorted(batch, key=lambda s: s[0])
    ids = [s[0] for s in canon]
    if len(set(ids)) != len(ids):
        raise ContractError("sample ids must be unique")
    res = {}
    for sid, x in canon:
        _check_clean(x, vocab)
        rng = np.random.default_rng([seed, sid])
        others = [j for j in range(len(canon)) if canon[j][0] != sid]
        donor = canon[others[int(rng.integers(len(others)))]][1] if others else x
        pick = rng.random(len(x)) < delta
        out = [donor[i] if pick[i] and i < len(donor) else t for i, t in enumerate(x)]
        res[sid] = (out, {"remask": [int(a != b) for a, b in zip(out, x)]})
    return [res[sid] for sid, _ in batch]


def corrupt(x, spec: CorruptionSpec, vocab: Vocab, batch=None, sample_id: int = 0):
    """Corrupt one clean sequence; returns (input state, labels)."""
    _check_clean(x, vocab)
    rng = np.random.default_rng([spec.seed, sample_id])
    if spec.kind == "unmask-forward":
        return unmask_forward(x, spec.rate, rng, vocab)
    if spec.kind == "insert-deflate":
        return insert_deflate(x, spec.rate, rng, vocab)
    if spec.kind == "delete-inflate":
        return delete_inflate(x, spec.alpha, spec.rate, rng, vocab)
    members = list(batch or []) or [(sample_id, list(x))]
    if sample_id not in [m[0] for m in members]:
        members.append((sample_id, list(x)))
    out = remask_shuffle(members, spec.rate, spec.seed, vocab)
    return out[[m[0] for m in members].index(sample_id)]
