"""E-FASP text format: parser, AST and static shape checks.

A program is a list of forms::

    ; comment
    (def is_sep (eq TE (tok SEP)))
    (return (ite is_sep 1 0))

A single bare expression is accepted as a program with an implicit return.
Atoms are integers, bit-vector literals ``#b0101`` (written MSB first,
stored LSB first), ``TE``, ``PE``, zero-argument operators and def names.
"""

from __future__ import annotations

import bisect
import re
from dataclasses import dataclass, field
from typing import Optional

SCALAR = 0
ANY = None  # unknown shape (scalar or vector), checked at evaluation


class ParseError(ValueError):
    def __init__(self, msg: str, span=None):
        where = f" at line {span[0]}, col {span[1]}" if span else ""
        super().__init__(msg + where)
        self.span = span


@dataclass(eq=False)
class Node:
    op: str
    args: tuple = ()
    value: object = None  # literal payload, names, matrices
    span: Optional[tuple] = None
    shape: Optional[int] = field(default=ANY)

    def __repr__(self):
        if self.op == "lit":
            return repr(self.value)
        if not self.args and self.value is None:
            return self.op
        inner = " ".join(repr(a) for a in self.args)
        extra = f" {self.value!r}" if self.value is not None else ""
        return f"({self.op}{extra}{' ' if inner else ''}{inner})"

    def depth(self) -> int:
        return 1 + max((a.depth() for a in self.args), default=0)

    def walk(self):
        seen = set()
        stack = [self]
        while stack:
            n = stack.pop()
            if id(n) in seen:
                continue
            seen.add(id(n))
            yield n
            stack.extend(n.args)


# ---------------------------------------------------------------- operator table

ELEMENTWISE2 = ("add", "minus", "multi", "max", "min", "and", "or", "xor",
                "leq", "geq", "eq", "lt", "gt", "reglu")
UNARY_SAME = ("not", "relu", "seq_max", "seq_min", "seq_and", "seq_or", "seq_sum", "seq_avg")
NULLARY = ("TE", "PE", "is_first", "is_last", "inv_seq_len", "nothing")
BITWISE = ("bit_add", "bit_minus", "shift_left", "shift_right")
PRIMITIVES = ("TE", "PE", "concat", "linear", "relu", "reglu", "aha", "lit", "var")

# name -> (min arity, max arity)
ARITY = {**{k: (2, 2) for k in ELEMENTWISE2}, **{k: (1, 1) for k in UNARY_SAME},
         **{k: (0, 0) for k in NULLARY}, **{k: (2, 2) for k in BITWISE},
         "concat": (1, 64), "linear": (1, 1), "aha": (3, 3), "rha": (3, 3),
         "rightmost_exact_match": (3, 4), "ite": (3, 3), "is_pos_k": (0, 0),
         "bits": (1, 1), "int": (1, 1), "slice": (1, 1), "at": (1, 1), "tok": (0, 0),
         "const": (0, 0), "var": (0, 0), "get_instruction": (1, 1), "emit": (1, 1)}
OPERATORS = frozenset(ARITY)


def _broadcast(a, b, op, span):
    if a is ANY or b is ANY:
        known = b if a is ANY else a
        return ANY if known in (ANY, SCALAR) else known
    if a == SCALAR:
        return b
    if b == SCALAR or a == b:
        return a
    raise ParseError(f"dimension mismatch in {op}: {a} vs {b}", span)


def infer(node: Node) -> Optional[int]:
    """Assign node.shape bottom-up; raise ParseError on mismatches."""
    op, a, sp = node.op, [x.shape for x in node.args], node.span
    if op == "lit":
        v = node.value
        return len(v) if isinstance(v, tuple) else SCALAR
    if op in ("TE", "is_first", "is_last", "inv_seq_len", "is_pos_k", "tok", "const", "int", "at"):
        return SCALAR
    if op == "var":
        return node.value[1] if isinstance(node.value, tuple) else SCALAR
    if op in ("PE", "nothing", "emit"):
        return ANY
    if op in ELEMENTWISE2:
        return _broadcast(a[0], a[1], op, sp)
    if op in UNARY_SAME:
        return a[0]
    if op == "ite":
        if a[0] not in (SCALAR, ANY):
            raise ParseError("ite condition must be scalar", sp)
        return _broadcast(a[1], a[2], op, sp)
    if op == "concat":
        if any(x is ANY for x in a):
            return ANY
        return sum(max(x, 1) for x in a)
    if op == "linear":
        mat = node.value
        cols = len(mat[0])
        if a[0] is not ANY and max(a[0], 1) != cols:
            raise ParseError(f"linear: matrix has {cols} columns, operand has dim {max(a[0], 1)}", sp)
        return SCALAR if len(mat) == 1 else len(mat)
    if op in ("aha", "rha", "rightmost_exact_match"):
        if a[0] is not ANY and a[1] is not ANY and a[0] != a[1]:
            raise ParseError(f"{op}: query dim {a[0]} != key dim {a[1]}", sp)
        if len(a) == 4 and a[2] is not ANY and a[3] is not ANY and a[3] not in (SCALAR, a[2]):
            raise ParseError(f"{op}: default dim {a[3]} != value dim {a[2]}", sp)
        return a[2]
    if op in BITWISE:
        for x in a:
            if x == SCALAR:
                raise ParseError(f"{op} needs bit-vector operands", sp)
        if op in ("bit_add", "bit_minus") and a[0] is not ANY and a[1] is not ANY and a[0] != a[1]:
            raise ParseError(f"{op}: widths {a[0]} and {a[1]} differ", sp)
        return a[0]
    if op == "bits":
        return node.value if isinstance(node.value, int) else ANY
    if op == "slice":
        lo, hi = node.value
        if a[0] is not ANY and not (0 <= lo <= hi <= a[0]):
            raise ParseError(f"slice [{lo}:{hi}] outside width {a[0]}", sp)
        return hi - lo
    if op == "get_instruction":
        return 5
    raise ParseError(f"unknown operator {op!r}", sp)


# ---------------------------------------------------------------- reader

_TOKEN = re.compile(r"\s*(?:(;[^\n]*)|(\()|(\))|([^\s()]+))")


def _tokens(text: str):
    starts = [0] + [m.end() for m in re.finditer("\n", text)]
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            break
        pos = m.end()
        if m.group(1) or m.lastindex is None:
            continue
        start = m.start(m.lastindex)
        line = bisect.bisect_right(starts, start)
        yield (m.group(2) or m.group(3) or m.group(4)), (line, start - starts[line - 1] + 1)


def _read(tokens):
    """Nested lists of (atom, span) from the token stream."""
    stack = [[]]
    spans = [None]
    for tok, sp in tokens:
        if tok == "(":
            stack.append([])
            spans.append(sp)
        elif tok == ")":
            if len(stack) == 1:
                raise ParseError("unbalanced ')'", sp)
            lst, lsp = stack.pop(), spans.pop()
            stack[-1].append(("list", lst, lsp))
        else:
            stack[-1].append(("atom", tok, sp))
    if len(stack) != 1:
        raise ParseError("unbalanced '('", spans[-1])
    return stack[0]


_INT = re.compile(r"^-?\d+$")
_BITS = re.compile(r"^#b[01]+$")


def _literal_data(item):
    kind, val, sp = item
    if kind == "atom":
        if _INT.match(val):
            return int(val)
        raise ParseError(f"expected number in matrix, got {val!r}", sp)
    return tuple(_literal_data(x) for x in val)


class _Builder:
    def __init__(self):
        self.env: dict = {}

    def atom(self, tok, sp) -> Node:
        if _INT.match(tok):
            return Node("lit", value=int(tok), span=sp, shape=SCALAR)
        if _BITS.match(tok):
            bits = tuple(int(b) for b in reversed(tok[2:]))
            return Node("lit", value=bits, span=sp, shape=len(bits))
        if tok in self.env:
            return self.env[tok]
        if tok in NULLARY:
            return self.finish(Node(tok, span=sp))
        if tok in OPERATORS:
            raise ParseError(f"operator {tok!r} used without arguments", sp)
        raise ParseError(f"unknown name {tok!r}", sp)

    def finish(self, node: Node) -> Node:
        lo, hi = ARITY[node.op]
        if not lo <= len(node.args) <= hi:
            want = str(lo) if lo == hi else f"{lo}-{hi}"
            raise ParseError(f"{node.op} takes {want} argument(s), got {len(node.args)}", node.span)
        node.shape = infer(node)
        return node

    def expr(self, item) -> Node:
        kind, val, sp = item
        if kind == "atom":
            return self.atom(val, sp)
        if not val:
            raise ParseError("empty form", sp)
        head = val[0]
        if head[0] != "atom":
            raise ParseError("operator expected", sp)
        op = head[1]
        rest = val[1:]
        if op not in OPERATORS:
            raise ParseError(f"unknown operator {op!r}", head[2])
        if op == "var" and len(rest) == 2:
            if rest[0][0] != "atom" or rest[1][0] != "atom" or not _INT.match(rest[1][1]):
                raise ParseError("var takes a name and an optional width", sp)
            return self.finish(Node(op, value=(rest[0][1], int(rest[1][1])), span=sp))
        if op in ("tok", "const", "var"):
            if len(rest) != 1 or rest[0][0] != "atom":
                raise ParseError(f"{op} takes one name", sp)
            return self.finish(Node(op, value=rest[0][1], span=sp))
        if op == "is_pos_k":
            if len(rest) != 1 or rest[0][0] != "atom" or not _INT.match(rest[0][1]):
                raise ParseError("is_pos_k takes an integer", sp)
            return self.finish(Node(op, value=int(rest[0][1]), span=sp))
        if op == "linear":
            if len(rest) != 2:
                raise ParseError("linear takes a matrix and an operand", sp)
            mat = _literal_data(rest[0])
            if isinstance(mat, int) or not mat:
                raise ParseError("linear needs a matrix literal", sp)
            if isinstance(mat[0], int):
                mat = (mat,)
            if len({len(r) for r in mat}) != 1:
                raise ParseError("ragged matrix", sp)
            return self.finish(Node(op, (self.expr(rest[1]),), value=mat, span=sp))
        if op == "bits":
            if len(rest) != 2:
                raise ParseError("bits takes an operand and a width", sp)
            w = rest[1]
            if w[0] == "atom" and _INT.match(w[1]):
                width = int(w[1])
            elif w[0] == "list" and len(w[1]) == 2 and w[1][0][1] == "const":
                width = ("const", w[1][1][1])
            else:
                raise ParseError("bits width must be an integer or (const NAME)", sp)
            return self.finish(Node(op, (self.expr(rest[0]),), value=width, span=sp))
        if op in ("slice", "at"):
            k = 3 if op == "slice" else 2
            if len(rest) != k or any(r[0] != "atom" or not _INT.match(r[1]) for r in rest[1:]):
                raise ParseError(f"{op} takes an operand and integer indices", sp)
            idx = tuple(int(r[1]) for r in rest[1:])
            return self.finish(Node(op, (self.expr(rest[0]),), value=idx if op == "slice" else idx[0],
                                    span=sp))
        return self.finish(Node(op, tuple(self.expr(x) for x in rest), span=sp))


def parse_program(text: str) -> Node:
    forms = _read(_tokens(text))
    b = _Builder()
    ret = None
    if len(forms) == 1 and not (forms[0][0] == "list" and forms[0][1]
                                and forms[0][1][0][1] in ("def", "return")):
        return b.expr(forms[0])
    for kind, val, sp in forms:
        if kind != "list" or not val or val[0][0] != "atom":
            raise ParseError("expected (def ...) or (return ...)", sp)
        head = val[0][1]
        if head == "def":
            if len(val) != 3 or val[1][0] != "atom":
                raise ParseError("def takes a name and an expression", sp)
            name = val[1][1]
            if name in b.env or name in OPERATORS:
                raise ParseError(f"name {name!r} already bound", sp)
            b.env[name] = b.expr(val[2])
        elif head == "return":
            if ret is not None:
                raise ParseError("more than one return", sp)
            if len(val) != 2:
                raise ParseError("return takes one expression", sp)
            ret = b.expr(val[1])
        else:
            raise ParseError(f"unexpected top-level form {head!r}", sp)
    if ret is None:
        raise ParseError("program has no return")
    return ret


def make(op: str, *args, value=None) -> Node:
    """Build a checked node programmatically."""
    if op == "lit":
        return Node("lit", value=value, shape=len(value) if isinstance(value, tuple) else SCALAR)
    node = Node(op, tuple(a if isinstance(a, Node) else make("lit", value=a) for a in args), value=value)
    lo, hi = ARITY[op]
    if not lo <= len(node.args) <= hi:
        raise ParseError(f"{op} takes {lo}-{hi} argument(s), got {len(node.args)}")
    node.shape = infer(node)
    return node
