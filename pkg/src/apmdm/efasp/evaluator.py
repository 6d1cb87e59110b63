"""Exact whole-sequence evaluation of E-FASP expressions.

Every node evaluates to an array over positions: shape (L,) for scalars
and (L, d) for vectors. Values are int64 while they stay integral and fall
back to object arrays of Fractions otherwise, so argmax sets are exact.
Positions are 0-based in the API; PE reports 1-based indices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from ..core import Vocab
from .lang import Node, make


@dataclass
class EvalContext:
    tokens: tuple
    codec: Vocab  # token code = vocabulary index
    pos: str = "SEQ"  # or "BiPE"
    word: int = 8
    pe_width: Optional[int] = None
    constants: dict = field(default_factory=dict)
    table: Optional[np.ndarray] = None  # instruction rows for get_instruction
    features: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.pos not in ("SEQ", "BiPE"):
            raise ValueError(f"unknown positional variant {self.pos!r}")
        need = max(1, math.ceil(math.log2(len(self.tokens) + 1)))
        if self.pos == "BiPE" and self.pe_width is not None and self.pe_width < need:
            raise ValueError(f"BiPE width {self.pe_width} below the {need} bits needed")

    def __len__(self):
        return len(self.tokens)

    def with_tokens(self, tokens) -> "EvalContext":
        return EvalContext(tuple(tokens), self.codec, self.pos, self.word, self.pe_width,
                           self.constants, self.table, self.features)


# ---------------------------------------------------------------- helpers

def _exact(num, den: int):
    """num / den elementwise, integral results stay int64."""
    num = np.asarray(num)
    if num.dtype != object and np.all(num % den == 0):
        return num // den
    out = np.empty(num.shape, dtype=object)
    flat = out.reshape(-1)
    for j, v in enumerate(np.asarray(num, dtype=object).reshape(-1)):
        flat[j] = Fraction(v) / den
    return _normalize(out)


def _normalize(a):
    """Demote object arrays of integral values back to int64."""
    a = np.asarray(a)
    if a.dtype == object and all(getattr(v, "denominator", 1) == 1 for v in a.reshape(-1)):
        return np.array([int(v) for v in a.reshape(-1)], dtype=np.int64).reshape(a.shape)
    return a


def _pair(a, b):
    if a.ndim == 1 and b.ndim == 2:
        a = a[:, None]
    elif a.ndim == 2 and b.ndim == 1:
        b = b[:, None]
    return a, b


def _ints(a):
    a = np.asarray(a)
    if a.dtype == object:
        return np.array([int(math.floor(v)) for v in a.reshape(-1)], dtype=np.int64).reshape(a.shape)
    return a.astype(np.int64)


def _bits(x, m: int):
    x = _ints(x) % (1 << m)
    return (x[:, None] >> np.arange(m, dtype=np.int64)) & 1


def _to_int(v):
    v = _ints(v)
    return (v << np.arange(v.shape[1], dtype=np.int64)).sum(axis=1)


def _flat_keys(a):
    if a.ndim == 1:
        return list(a.tolist())
    return [tuple(r) for r in a.tolist()]


def rightmost_index(q, k):
    """For each query, the largest j with k[j] == q, or -1."""
    L = len(k)
    if q.ndim == 1 and k.ndim == 1 and q.dtype != object and k.dtype != object:
        uniq, first = np.unique(k[::-1], return_index=True)
        last = L - 1 - first
        pos = np.clip(np.searchsorted(uniq, q), 0, len(uniq) - 1)
        return np.where(uniq[pos] == q, last[pos], -1)
    table = {}
    for j, key in enumerate(_flat_keys(k)):
        table[key] = j
    return np.array([table.get(key, -1) for key in _flat_keys(q)], dtype=np.int64)


def _scores(q, k):
    if q.ndim == 1:
        return np.multiply.outer(q, k)
    return q @ k.T


def _argmax_sets(q, k):
    s = _scores(q, k)
    mx = s.max(axis=1)
    return s == mx[:, None]


# ---------------------------------------------------------------- operators

def _op(node: Node, a: list, ctx: EvalContext):
    op, L = node.op, len(ctx)
    if op == "lit":
        v = node.value
        if isinstance(v, tuple):
            return np.tile(np.array(v, dtype=np.int64), (L, 1))
        return np.full(L, v, dtype=np.int64)
    if op == "TE":
        return np.asarray(ctx.tokens, dtype=np.int64)
    if op == "PE":
        idx = np.arange(1, L + 1, dtype=np.int64)
        if ctx.pos == "SEQ":
            return idx
        width = ctx.pe_width or max(1, math.ceil(math.log2(L + 1)))
        return _bits(idx, width)
    if op == "var":
        name = node.value[0] if isinstance(node.value, tuple) else node.value
        return np.asarray(ctx.features[name])
    if op == "tok":
        return np.full(L, ctx.codec.id(node.value), dtype=np.int64)
    if op == "const":
        return np.full(L, ctx.constants[node.value], dtype=np.int64)
    if op == "concat":
        return np.concatenate([x[:, None] if x.ndim == 1 else x for x in a], axis=1)
    if op == "linear":
        x = a[0][:, None] if a[0].ndim == 1 else a[0]
        mat = np.array(node.value, dtype=np.int64)
        res = x @ mat.T
        return res[:, 0] if mat.shape[0] == 1 else res
    if op == "relu":
        return np.maximum(a[0], 0)
    if op == "reglu":
        x, y = _pair(a[0], a[1])
        return x * np.maximum(y, 0)
    if op in ("add", "minus", "multi", "max", "min", "and", "or", "xor",
              "leq", "geq", "eq", "lt", "gt"):
        x, y = _pair(a[0], a[1])
        if op == "add":
            return x + y
        if op == "minus":
            return x - y
        if op == "multi":
            return x * y
        if op in ("max", "or"):
            return np.maximum(x, y)
        if op in ("min", "and"):
            return np.minimum(x, y)
        if op == "xor":
            return x + y - 2 * x * y
        cmp = {"leq": np.less_equal, "geq": np.greater_equal, "eq": np.equal,
               "lt": np.less, "gt": np.greater}[op]
        return cmp(x, y).astype(np.int64)
    if op == "not":
        return 1 - a[0]
    if op in ("seq_max", "seq_or"):
        return np.broadcast_to(a[0].max(axis=0), a[0].shape).copy()
    if op in ("seq_min", "seq_and"):
        return np.broadcast_to(a[0].min(axis=0), a[0].shape).copy()
    if op == "seq_sum":
        return np.broadcast_to(a[0].sum(axis=0), a[0].shape).copy()
    if op == "seq_avg":
        return np.broadcast_to(_exact(a[0].sum(axis=0), L), a[0].shape).copy()
    if op == "is_first":
        return (np.arange(L) == 0).astype(np.int64)
    if op == "is_last":
        return (np.arange(L) == L - 1).astype(np.int64)
    if op == "is_pos_k":
        return (np.arange(1, L + 1) == node.value).astype(np.int64)
    if op == "inv_seq_len":
        if L == 1:
            return np.ones(1, dtype=np.int64)
        return np.array([Fraction(1, L)] * L, dtype=object)
    if op == "ite":
        c, x, y = a
        x, y = _pair(x, y)
        if x.ndim == 2:
            c = c[:, None]
        return np.where(c != 0, x, y)
    if op == "aha":
        sets = _argmax_sets(a[0], a[1])
        v = a[2]
        cnt = sets.sum(axis=1)
        tot = sets.astype(v.dtype) @ v if v.dtype != object else sets.astype(object) @ v
        if v.ndim == 2:
            cols = [_div_rows(tot[:, j], cnt) for j in range(v.shape[1])]
            if any(c.dtype == object for c in cols):
                cols = [c.astype(object) for c in cols]
            return np.stack(cols, axis=1)
        return _div_rows(tot, cnt)
    if op == "rha":
        sets = _argmax_sets(a[0], a[1])
        j = L - 1 - np.argmax(sets[:, ::-1], axis=1)
        return a[2][j]
    if op == "rightmost_exact_match":
        j = rightmost_index(a[0], a[1])
        v = a[2]
        if len(a) == 4:
            d = a[3]
        else:
            d = np.zeros_like(v)
        got = v[np.maximum(j, 0)]
        if v.ndim == 2 and d.ndim == 1:
            d = np.repeat(d[:, None], v.shape[1], axis=1)
        hit = j >= 0
        return np.where(hit[:, None] if v.ndim == 2 else hit, got, d)
    if op == "bits":
        w = node.value
        m = ctx.constants[w[1]] if isinstance(w, tuple) else w
        return _bits(a[0], m)
    if op == "int":
        return _to_int(a[0])
    if op == "slice":
        lo, hi = node.value
        return a[0][:, lo:hi]
    if op == "at":
        return a[0][:, node.value]
    if op in ("bit_add", "bit_minus"):
        m = a[0].shape[1]
        x, y = _to_int(a[0]), _to_int(a[1])
        return _bits(x + y if op == "bit_add" else x - y, m)
    if op in ("shift_left", "shift_right"):
        m = a[0].shape[1]
        x, t = _to_int(a[0]), _to_int(a[1])
        small = t < m
        ts = np.where(small, t, 0)
        r = (x << ts) if op == "shift_left" else (x >> ts)
        return _bits(np.where(small, r, 0), m)
    if op == "get_instruction":
        tab = ctx.table
        n = len(tab) - 1  # last row is the halted row
        pc = _ints(a[0])
        return tab[np.where((pc >= 0) & (pc < n), pc, n)]
    if op == "emit":
        V = len(ctx.codec)
        code = _ints(a[0])
        out = np.zeros((L, V), dtype=np.int64)
        ok = (code >= 0) & (code < V)
        out[np.nonzero(ok)[0], code[ok]] = 1
        return out
    if op == "nothing":
        return np.zeros((L, len(ctx.codec)), dtype=np.int64)
    raise ValueError(f"no semantics for {op!r}")


def _div_rows(tot, cnt):
    if tot.dtype != object and np.all(tot % cnt == 0):
        return tot // cnt
    return _normalize(np.array([Fraction(t) / c for t, c in zip(tot.tolist(), cnt.tolist())],
                               dtype=object))


def evaluate(root: Node, ctx: EvalContext, memo: Optional[dict] = None):
    """Value of root at every position."""
    memo = {} if memo is None else memo
    stack = [(root, False)]
    while stack:
        node, ready = stack.pop()
        if id(node) in memo:
            continue
        if ready:
            memo[id(node)] = _op(node, [memo[id(c)] for c in node.args], ctx)
            continue
        stack.append((node, True))
        for c in node.args:
            if id(c) not in memo:
                stack.append((c, False))
    return memo[id(root)]


def _py(v):
    if isinstance(v, np.ndarray):
        return tuple(_py(x) for x in v.tolist()) if v.dtype != object else tuple(v.tolist())
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def eval_at(e: Node, ctx: EvalContext, i: int):
    """Exact value of e at 0-based position i."""
    if not 0 <= i < len(ctx):
        raise IndexError(i)
    v = evaluate(e, ctx)[i]
    if isinstance(v, np.ndarray):
        return tuple(_py(x) for x in v)
    return _py(v)


def apply_operator(name: str, args, ctx: EvalContext, i: int, value=None):
    return eval_at(make(name, *args, value=value), ctx, i)
