"""Flattening trajectories into single sequences for autoregressive baselines.

PAIR lists (position, token) for each unmask event of an unmask-only
trajectory. TRIPLET writes every edit as (position, op, value) with STEP
between decode steps and ANSWER before the final state.
"""

from __future__ import annotations

from ..core import ContractError, DenoiserOutput, Vocab, apply_transition
from .common import Trajectory

OPS = ("UNMASK", "REMASK", "INSERT", "DELETE")
MARKS = ("SEP", "STEP", "ANSWER", "NONE") + OPS
MAX_POS = 400


def arm_vocab(base: Vocab, max_pos: int = MAX_POS) -> Vocab:
    extra = [s for s in MARKS if s not in base.symbols]
    pos = [f"POSE{i}" for i in range(max_pos)]
    return Vocab(list(base.symbols) + extra + pos, base.mask_tokens, dict(base.special))


def _pos(vocab: Vocab, i: int) -> int:
    name = f"POSE{i}"
    if name not in vocab.symbols:
        raise ContractError(f"position {i} beyond the position-token range")
    return vocab.id(name)


def step_ops(x, y, c, base: Vocab) -> list:
    """Edits of one step as (position, op, value-name or None)."""
    ops = []
    for i, (xi, yi, (r, ins, d)) in enumerate(zip(x, y, c)):
        m = base.is_mask(xi)
        if m and d:
            ops.append((i, "DELETE", None))
            continue
        if r:
            ops.append((i, "REMASK", None))
        elif m:
            ops.append((i, "UNMASK", base.symbols[yi]))
        if ins:
            ops.append((i, "INSERT", None if ins == 1 else base.mask_tokens[ins - 1]))
    return ops


def pair_sequence(tr: Trajectory, vocab: Vocab = None) -> tuple:
    vocab = vocab or arm_vocab(tr.vocab)
    base = tr.vocab
    x0 = tr.x0
    k = next((i for i, t in enumerate(x0) if base.is_mask(t)), len(x0))
    prefix, masks = list(x0[:k]), len(x0) - k
    if any(not base.is_mask(t) for t in x0[k:]):
        raise ContractError("PAIR needs the input followed only by masks")
    sep = vocab.id("SEP")
    out = [vocab.id(base.symbols[t]) for t in prefix]
    if not prefix or base.symbols[prefix[-1]] != "SEP":
        out.append(sep)
    want = len(out) + 2 * masks  # 2S - n - 1 when the input ends with SEP
    for s in tr.steps:
        for i, op, v in step_ops(s.x, s.y, s.c, base):
            if op == "REMASK" and base.is_mask(s.x[i]):
                continue  # mask kept in place
            if op != "UNMASK":
                raise ContractError(f"PAIR format cannot carry {op}")
            out += [_pos(vocab, i), vocab.id(v)]
    return tuple(out + [vocab.mask] * (want - len(out)))


def triplet_sequence(tr: Trajectory, vocab: Vocab = None) -> tuple:
    vocab = vocab or arm_vocab(tr.vocab)
    base = tr.vocab
    conv = lambda xs: [vocab.id(base.symbols[t]) for t in xs]  # noqa: E731
    out = conv(tr.x0)
    for s in tr.steps:
        out.append(vocab.id("STEP"))
        for i, op, v in step_ops(s.x, s.y, s.c, base):
            out += [_pos(vocab, i), vocab.id(op), vocab.id(v if v is not None else "NONE")]
    out.append(vocab.id("ANSWER"))
    return tuple(out + conv(tr.final))


def arm_sequentialize(tr: Trajectory, fmt: str = "TRIPLET", vocab: Vocab = None) -> tuple:
    fmt = fmt.upper()
    if fmt == "PAIR":
        return pair_sequence(tr, vocab)
    if fmt == "TRIPLET":
        return triplet_sequence(tr, vocab)
    raise ContractError(f"unknown format {fmt!r}")


def triplet_replay(seq, base: Vocab, vocab: Vocab = None) -> tuple:
    """Rebuild the final state by applying the triplets to the initial state."""
    vocab = vocab or arm_vocab(base)
    names = vocab.names(seq)
    if "ANSWER" not in names:
        raise ContractError("no ANSWER marker")
    ans = names.index("ANSWER")
    first = names.index("STEP") if "STEP" in names[:ans] else ans
    x = base.ids(names[:first])
    i = first
    while i < ans:
        if names[i] != "STEP":
            raise ContractError(f"expected STEP at {i}")
        i += 1
        ops = []
        while i < ans and names[i] != "STEP":
            p, op, v = names[i:i + 3]
            ops.append((int(p[4:]), op, v))
            i += 3
        x = apply_ops(x, ops, base)
    return x


def apply_ops(x, ops, base: Vocab) -> tuple:
    fill = base.base_ids[0]
    y = [fill if base.is_mask(t) else t for t in x]
    c = [[0, 0, 0] for _ in x]
    for p, op, v in ops:
        if not 0 <= p < len(x):
            raise ContractError(f"position {p} outside the state")
        if op == "UNMASK":
            if not base.is_mask(x[p]):
                raise ContractError(f"UNMASK on a non-mask at {p}")
            y[p] = base.id(v)
        elif op == "REMASK":
            c[p][0] = 1
        elif op == "INSERT":
            c[p][1] = 1 if v in (None, "NONE") else base.mask_tokens.index(v) + 1
        elif op == "DELETE":
            c[p][2] = 1
        else:
            raise ContractError(f"unknown op {op!r}")
    return apply_transition(tuple(x), DenoiserOutput(tuple(y), tuple(tuple(ci) for ci in c)), base)
