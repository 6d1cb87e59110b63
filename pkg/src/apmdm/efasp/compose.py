"""Derived operators rewritten into primitives only.

The primitives are TE, PE, literals, concat, linear projection, relu,
reglu (a * relu(b)) and average-hard attention. ``expand`` rewrites an
expression so that evaluating it exercises only those; comparing the two
evaluations checks the library against its defining compositions.
Comparison and aggregation identities assume integer-valued operands and
the SEQ positional variant, as in their definitions.
"""

from __future__ import annotations

from .lang import PRIMITIVES, SCALAR, Node, make


def _dim(x: Node) -> int:
    # unknown shapes only arise from PE here, which is scalar under SEQ
    return 1 if x.shape is None else max(x.shape, 1)


def _eye(d, scale=1):
    return tuple(tuple(scale if i == j else 0 for j in range(d)) for i in range(d))


def lin(mat, x):
    return make("linear", x, value=tuple(tuple(r) for r in mat))


def lit(v):
    return make("lit", value=v)


def _widen(x: Node, d: int) -> Node:
    if d == 1 or _dim(x) == d:
        return x
    return lin(tuple((1,) for _ in range(d)), x)


def add(a, b):
    d = max(_dim(a), _dim(b))
    a, b = _widen(a, d), _widen(b, d)
    return lin(tuple(r + r for r in _eye(d)), make("concat", a, b))


def neg(a):
    return lin(_eye(_dim(a), -1), a)


def sub(a, b):
    d = max(_dim(a), _dim(b))
    a, b = _widen(a, d), _widen(b, d)
    return lin(tuple(r + tuple(-v for v in r) for r in _eye(d)), make("concat", a, b))


def const_like(v, x):
    d = _dim(x)
    return lit(v) if d == 1 else lit((v,) * d)


def relu(a):
    return make("relu", a)


def multi(a, b):
    d = max(_dim(a), _dim(b))
    a, b = _widen(a, d), _widen(b, d)
    return sub(make("reglu", a, b), make("reglu", a, neg(b)))


def vmax(a, b):
    return add(a, relu(sub(b, a)))


def vmin(a, b):
    return sub(a, relu(sub(a, b)))


def vnot(a):
    return add(const_like(1, a), neg(a))


def vand(a, b):
    return vmin(a, b)


def vor(a, b):
    return vnot(vand(vnot(a), vnot(b)))


def vxor(a, b):
    return vor(vand(a, vnot(b)), vand(vnot(a), b))


def leq(a, b):
    diff = sub(b, a)
    return sub(relu(add(diff, const_like(1, diff))), relu(diff))


def geq(a, b):
    return leq(b, a)


def eq(a, b):
    return vand(leq(a, b), leq(b, a))


def lt(a, b):
    return leq(a, sub(b, const_like(1, b)))


def gt(a, b):
    return lt(b, a)


def ite(c, a, b):
    return add(multi(c, a), multi(vnot(c), b))


def pe():
    return make("PE")


def seq_max(x):
    if _dim(x) != 1:
        raise ValueError("seq_max composition is defined on scalars")
    return make("aha", lit(1), x, x)


def seq_min(x):
    return neg(seq_max(neg(x)))


def seq_avg(x):
    return make("aha", lit(0), lit(0), x)


def seq_len():
    return seq_max(pe())


def seq_sum(x):
    return multi(seq_avg(x), seq_len())


def is_pos(k):
    return eq(pe(), lit(k))


def is_first():
    return is_pos(1)


def is_last():
    return eq(pe(), seq_len())


def inv_seq_len():
    return seq_avg(is_first())


def rha(q, k, v):
    """Rightmost element of the argmax set via a positional tie-break."""
    scale = add(seq_len(), lit(1))
    qs = multi(q, scale)
    return make("aha", make("concat", qs, lit(1)), make("concat", k, pe()), v)


def rightmost_exact_match(q, k, v, default=None):
    if _dim(q) != 1:
        raise ValueError("rightmost_exact_match composition is defined on scalar keys")
    # -(q - k)^2 = 2qk - k^2 - q^2, the last term is constant per query
    qv = make("concat", lin(((2,),), q), lit(-1))
    kv = make("concat", k, multi(k, k))
    picked = rha(qv, kv, make("concat", v, k))
    dv = _dim(v)
    val = lin(tuple(r + (0,) for r in _eye(dv)), picked)
    got = lin(((0,) * dv + (1,),), picked)
    found = eq(got, q)
    default = lit(0) if default is None else default
    return ite(found, val, _widen(default, dv) if dv > 1 else default)


def at(v, i):
    d = _dim(v)
    return lin((tuple(1 if j == i else 0 for j in range(d)),), v)


def to_int(v):
    return lin((tuple(1 << j for j in range(_dim(v))),), v)


def eq_k(t, k):
    """Hat function: 1 at t == k, 0 at other integers."""
    return add(sub(relu(add(t, lit(1 - k))), lin(((2,),), relu(add(t, lit(-k))))),
               relu(add(t, lit(-k - 1))))


def _adder(a, b, carry_in: int):
    m = _dim(a)
    A = [at(a, i) for i in range(m)]
    B = [at(b, i) for i in range(m)]
    g = [vand(x, y) for x, y in zip(A, B)]
    p = [vxor(x, y) for x, y in zip(A, B)]
    out = []
    for i in range(m):
        witnesses = []
        for j in range(-1 if carry_in else 0, i):
            span = list(range(j + 1, i))
            gen = lit(1) if j < 0 else g[j]
            if span:
                tot = p[span[0]]
                for l in span[1:]:
                    tot = add(tot, p[l])
                witnesses.append(vand(gen, eq_k(tot, len(span))))
            else:
                witnesses.append(gen)
        carry = lit(0)
        for w in witnesses:
            carry = vor(carry, w)
        out.append(vxor(p[i], carry))
    return make("concat", *out)


def bit_add(a, b):
    return _adder(a, b, 0)


def bit_minus(a, b):
    return _adder(a, vnot(b), 1)


def _shift(a, tau, left: bool):
    m = _dim(a)
    t = to_int(tau)
    gates = [eq_k(t, s) for s in range(m)]
    out = []
    for k in range(m):
        terms = []
        for s in range(m):
            src = k - s if left else k + s
            if 0 <= src < m:
                terms.append(multi(gates[s], at(a, src)))
        acc = lit(0)
        for term in terms:
            acc = add(acc, term)
        out.append(acc)
    return make("concat", *out)


def shift_left(a, tau):
    return _shift(a, tau, True)


def shift_right(a, tau):
    return _shift(a, tau, False)


_RULES = {
    "add": add, "minus": sub, "multi": multi, "max": vmax, "min": vmin,
    "and": vand, "or": vor, "not": vnot, "xor": vxor,
    "leq": leq, "geq": geq, "eq": eq, "lt": lt, "gt": gt, "ite": ite,
    "seq_max": seq_max, "seq_or": seq_max, "seq_min": seq_min, "seq_and": seq_min,
    "seq_sum": seq_sum, "seq_avg": seq_avg,
    "rha": rha, "rightmost_exact_match": rightmost_exact_match,
    "bit_add": bit_add, "bit_minus": bit_minus, "shift_left": shift_left, "shift_right": shift_right,
    "int": to_int,
}
_NULL = {"is_first": is_first, "is_last": is_last, "inv_seq_len": inv_seq_len}


def expand(node: Node, memo=None) -> Node:
    memo = {} if memo is None else memo
    if id(node) in memo:
        return memo[id(node)]
    args = tuple(expand(a, memo) for a in node.args)
    op = node.op
    if op in _RULES:
        out = _RULES[op](*args)
    elif op in _NULL:
        out = _NULL[op]()
    elif op == "is_pos_k":
        out = is_pos(node.value)
    elif op == "at":
        out = at(args[0], node.value)
    elif op == "slice":
        lo, hi = node.value
        d = _dim(args[0])
        out = lin(tuple(tuple(1 if j == i else 0 for j in range(d)) for i in range(lo, hi)), args[0])
    elif op in PRIMITIVES:
        out = node if args == node.args else make(op, *args, value=node.value)
    else:
        raise ValueError(f"{op!r} has no primitive composition")
    memo[id(node)] = out
    return out


def is_primitive(node: Node) -> bool:
    return all(n.op in PRIMITIVES for n in node.walk())


__all__ = ["expand", "is_primitive", "SCALAR"]
