"""Min-cut graph editing: Edmonds-Karp played out as edits on a token sequence.

Layout: PROMPT SRC s TGT t GRAPH (u v f1 f2)* NODES (id level parent)* EOA,
where f1/f2 say whether u->v / v->u is available in the residual graph
(FB yes, MASK no). The initial sequence has no feature slots; the first
three steps grow them. The policy reads its phase off the state alone.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Optional

from ..core import ZERO, ContractError, DenoiserOutput, StopCriterion, Vocab, apply_transition, decode
from .common import Recorder, Trajectory

MAX_NODES = 50
STRUCT = ["PROMPT", "SRC", "TGT", "GRAPH", "NODES", "(", ")", "EOA", "EOS"]
FEATS = ["FB", "MASK"] + [f"LVL{i}" for i in range(10)] + ["INF", "NIL", "PAR"]
# edge counts used for the length statistics
EDGES_FOR = {4: 12, 5: 17, 6: 23, 7: 29, 8: 36, 9: 43, 10: 50}

REMASK, INSERT, DELETE = (1, 0, 0), (0, 1, 0), (0, 0, 1)


def make_vocab(max_nodes: int = MAX_NODES) -> Vocab:
    return Vocab(STRUCT + FEATS + [str(i) for i in range(max_nodes)] + ["M"])


VOCAB = make_vocab()


@dataclass(frozen=True)
class GraphInstance:
    n: int
    edges: tuple  # ((u, v), ...) in sequence order
    s: int
    t: int

    def __post_init__(self):
        if self.s == self.t:
            raise ContractError("source and target must differ")
        if not (0 <= self.s < self.n and 0 <= self.t < self.n):
            raise ContractError("source/target out of range")
        seen = set()
        for u, v in self.edges:
            if u == v or not (0 <= u < self.n and 0 <= v < self.n):
                raise ContractError(f"bad edge {u}->{v}")
            if (u, v) in seen:
                raise ContractError(f"duplicate edge {u}->{v}")
            seen.add((u, v))

    def to_text(self) -> str:
        lines = [f"{self.n} {len(self.edges)}"] + [f"{u} {v}" for u, v in self.edges]
        return "\n".join(lines + [f"{self.s} {self.t}"]) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "GraphInstance":
        rows = [ln.split() for ln in text.strip().splitlines() if ln.strip()]
        n, m = map(int, rows[0])
        if len(rows) != m + 2:
            raise ContractError(f"expected {m} edge lines")
        edges = tuple((int(a), int(b)) for a, b in rows[1:1 + m])
        s, t = map(int, rows[-1])
        return cls(n, edges, s, t)


def random_instance(n: int, rng: random.Random, m: Optional[int] = None) -> GraphInstance:
    pairs = [(u, v) for u in range(n) for v in range(n) if u != v]
    m = EDGES_FOR.get(n, min(len(pairs), round(0.5 * n * (n - 1)))) if m is None else m
    edges = rng.sample(pairs, min(m, len(pairs)))
    s, t = rng.sample(range(n), 2)
    return GraphInstance(n, tuple(edges), s, t)


def encode(g: GraphInstance, vocab: Vocab = VOCAB) -> tuple:
    if g.n > sum(1 for s in vocab.symbols if s.isdigit()):
        raise ContractError(f"{g.n} nodes exceed the vocabulary's id range")
    ids = [str(i) for i in range(g.n)]
    toks = ["PROMPT", "SRC", str(g.s), "TGT", str(g.t), "GRAPH"]
    for u, v in g.edges:
        toks += [str(u), str(v)]
    toks += ["NODES"] + ids + ["EOA"]
    return vocab.ids(toks)


# -------------------------------------------------------------- parsing


@dataclass
class _Parsed:
    s: int
    t: int
    edges: list  # [(u, v, upos, [feature positions])]
    nodes: dict  # id -> (pos, [feature positions])
    eoa: int
    tail: list  # positions after EOA


def _parse(x, vocab: Vocab) -> _Parsed:
    names = vocab.names(x)
    try:
        g, nd, eoa = names.index("GRAPH"), names.index("NODES"), names.index("EOA")
        s, t = int(names[2]), int(names[4])
    except (ValueError, IndexError):
        raise ContractError("malformed graph state") from None
    edges, i = [], g + 1
    while i < nd:
        if names[i] == "M":
            # a fully masked edge awaiting deletion
            j = i
            while j < nd and names[j] == "M":
                j += 1
            edges += [(None, None, p, [p + 2, p + 3]) for p in range(i, j, 4)]
            i = j
            continue
        if not (names[i].isdigit() and names[i + 1].isdigit()):
            raise ContractError(f"malformed edge at {i}")
        u, v, p = int(names[i]), int(names[i + 1]), i
        i += 2
        feats = []
        while i < nd and not names[i].isdigit() and not (names[i] == "M" and len(feats) == 2):
            feats.append(i)
            i += 1
        edges.append((u, v, p, feats))
    nodes, i = {}, nd + 1
    while i < eoa:
        k, p = int(names[i]), i
        i += 1
        feats = []
        # a parent slot holds a node id; it exists whenever the level slot is filled
        if i < eoa and not names[i].isdigit():
            feats.append(i)
            i += 1
            if i < eoa and (names[i - 1] != "M" or not names[i].isdigit()):
                feats.append(i)
                i += 1
        nodes[k] = (p, feats)
    return _Parsed(s, t, edges, nodes, eoa, list(range(eoa + 1, len(x))))


def _level(name: str) -> Optional[int]:
    return int(name[3:]) if name.startswith("LVL") else None


def _avail(names, e, a: int, b: int) -> bool:
    """Residual edge a->b through list edge e."""
    u, v, _, f = e
    if (u, v) == (a, b):
        return names[f[0]] == "FB"
    if (u, v) == (b, a):
        return names[f[1]] == "FB"
    return False


# -------------------------------------------------------------- policy


def policy(x, rng=None, vocab: Vocab = VOCAB) -> DenoiserOutput:
    """Scripted Edmonds-Karp denoiser."""
    names = vocab.names(x)
    P = _parse(x, vocab)
    y = [vocab.base_ids[0] if vocab.is_mask(tk) else tk for tk in x]
    c = [ZERO] * len(x)
    tok = vocab.id

    def put(p, name):
        y[p] = tok(name)

    if "EOS" in names:
        return DenoiserOutput(tuple(y), tuple(c))

    # feature expansion
    bare_e = [e for e in P.edges if e[0] is not None and not e[3]]
    bare_n = [k for k, (p, f) in P.nodes.items() if not f]
    if bare_e or bare_n:
        for u, v, p, _ in bare_e:
            c[p + 1] = INSERT
        for k in bare_n:
            c[P.nodes[k][0]] = INSERT
        return DenoiserOutput(tuple(y), tuple(c))
    if (any(len(e[3]) == 1 for e in P.edges if e[0] is not None)
            or any(len(f) == 1 for _, f in P.nodes.values())):
        for u, v, p, f in P.edges:
            if len(f) == 1:
                put(f[0], "FB")
                c[f[0]] = INSERT
        for k, (p, f) in P.nodes.items():
            if len(f) == 1:
                put(f[0], "LVL0" if k == P.s else "INF")
                c[f[0]] = INSERT
        return DenoiserOutput(tuple(y), tuple(c))
    if any(len(e[3]) == 2 and names[e[3][0]] == "FB" and names[e[3][1]] == "M" for e in P.edges
           if e[0] is not None) or any(len(f) == 2 and names[f[1]] == "M" and names[f[0]] != "M"
                                       for _, f in P.nodes.values()):
        for u, v, p, f in P.edges:
            if names[f[1]] == "M":
                put(f[1], "MASK")
        for k, (p, f) in P.nodes.items():
            if names[f[1]] == "M":
                put(f[1], "NIL")
        return DenoiserOutput(tuple(y), tuple(c))

    # termination: deletion and EOS
    if any(e[0] is None for e in P.edges):
        for _, _, p, _ in P.edges:
            if names[p] == "M":
                for q in range(p, p + 4):
                    c[q] = DELETE
        c[P.eoa] = INSERT
        return DenoiserOutput(tuple(y), tuple(c))
    if P.tail and names[P.tail[0]] == "M":
        put(P.tail[0], "EOS")
        return DenoiserOutput(tuple(y), tuple(c))

    level = {k: _level(names[f[0]]) for k, (p, f) in P.nodes.items() if names[f[0]] != "M"}
    swapped = [e for e in P.edges if names[e[3][0]] == "M"]
    if swapped:
        # augmentation, second half: orient the masked path from s and flip it
        at, todo = P.s, list(swapped)
        while todo:
            e = next((e for e in todo if at in (e[0], e[1])), None)
            if e is None:
                raise ContractError("masked edges do not form a path from the source")
            todo.remove(e)
            fwd = e[0] == at
            put(e[3][0], "MASK" if fwd else "FB")
            put(e[3][1], "FB" if fwd else "MASK")
            at = e[1] if fwd else e[0]
        for k, (p, f) in P.nodes.items():
            put(f[0], "LVL0" if k == P.s else "INF")
            put(f[1], "NIL")
        return DenoiserOutput(tuple(y), tuple(c))

    masked_nodes = [k for k, (p, f) in P.nodes.items() if names[f[0]] == "M"]
    L = max((lv for lv in level.values() if lv is not None), default=0)
    frontier = sorted(k for k, lv in level.items() if lv == L)
    if masked_nodes:
        # BFS layer, second half
        for k in masked_nodes:
            par = next(a for a in frontier if any(_avail(names, e, a, k) for e in P.edges))
            put(P.nodes[k][1][0], f"LVL{L + 1}")
            put(P.nodes[k][1][1], str(par))
        return DenoiserOutput(tuple(y), tuple(c))

    if level.get(P.t) is not None:
        # augmentation, first half: follow parents back from t
        path_edges, w = [], P.t
        while w != P.s:
            par = int(names[P.nodes[w][1][1]])
            e = next(e for e in P.edges if _avail(names, e, par, w))
            path_edges.append(e)
            w = par
        for e in path_edges:
            c[e[3][0]] = c[e[3][1]] = REMASK
        for p, f in P.nodes.values():
            c[f[0]] = c[f[1]] = REMASK
        return DenoiserOutput(tuple(y), tuple(c))

    new = [k for k, lv in level.items() if lv is None
           and any(_avail(names, e, a, k) for a in frontier for e in P.edges)]
    if new:
        for k in new:
            f = P.nodes[k][1]
            c[f[0]] = c[f[1]] = REMASK
        return DenoiserOutput(tuple(y), tuple(c))

    # no augmenting path: S is the visited set
    cut = [e for e in P.edges if level.get(e[0]) is not None and level.get(e[1]) is None]
    if cut:
        for _, _, p, _ in cut:
            for q in range(p, p + 4):
                c[q] = REMASK
    else:
        c[P.eoa] = INSERT
    return DenoiserOutput(tuple(y), tuple(c))


scripted_denoiser = policy


def final_edges(x, vocab: Vocab = VOCAB) -> list:
    P = _parse(x, vocab)
    return [(u, v) for u, v, _, _ in P.edges]


def graph_trajectory(g: GraphInstance, rng=None, vocab: Vocab = VOCAB,
                     max_steps: int = 10_000) -> Trajectory:
    rec = Recorder("graph", vocab, encode(g, vocab), {"n": g.n, "m": len(g.edges), "s": g.s, "t": g.t})
    for _ in range(max_steps):
        out = policy(rec.x, vocab=vocab)
        if apply_transition(rec.x, out, vocab) == rec.x:
            break
        rec.step(out.y, out.controls)
    else:
        raise ContractError("step budget exhausted")
    left = final_edges(rec.x, vocab)
    rec.tr.meta["removed"] = len(g.edges) - len(left)
    rec.tr.meta["final_length"] = len(rec.x)
    return rec.tr


def run_scripted(g: GraphInstance, vocab: Vocab = VOCAB, max_steps: int = 10_000):
    den = lambda x, rng=None: policy(x, rng, vocab)  # noqa: E731
    return decode(den, encode(g, vocab), StopCriterion("end-token", "EOS", max_steps), seed=0,
                  vocab=vocab)


def decode_accuracy(den, n: int, trials: int, rng: random.Random, max_steps: int = 200) -> float:
    """Fraction of random n-node instances a denoiser cuts optimally; malformed states miss."""
    ok = 0
    for _ in range(trials):
        g = random_instance(n, rng)
        try:
            tr = decode(den, encode(g), StopCriterion("end-token", "EOS", max_steps), seed=0, vocab=VOCAB)
        except ContractError:
            continue
        ok += check_result(g, tr.final)["optimal"]
    return ok / max(trials, 1)


def check_result(g: GraphInstance, x, vocab: Vocab = VOCAB) -> dict:
    """Is the edited graph a valid minimum cut of g?"""
    names = vocab.names(x)
    left = final_edges(x, vocab) if "EOS" in names else None
    if left is None:
        return {"done": False, "disconnected": False, "optimal": False, "removed": None}
    ok_subset = set(left) <= set(g.edges) and len(set(left)) == len(left)
    disc = not reachable(g.n, left, g.s, g.t)
    removed = len(g.edges) - len(left)
    return {"done": True, "disconnected": disc and ok_subset,
            "optimal": disc and ok_subset and removed == mincut_oracle(g), "removed": removed}


# -------------------------------------------------------------- oracles


def reachable(n: int, edges, s: int, t: int) -> bool:
    adj = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
    seen, stack = {s}, [s]
    while stack:
        a = stack.pop()
        for b in adj[a]:
            if b not in seen:
                seen.add(b)
                stack.append(b)
    return t in seen


def mincut_oracle(g: GraphInstance) -> int:
    """Max flow by DFS augmenting paths on a capacity matrix."""
    if g.n > 12:
        raise ContractError("oracle is meant for n <= 12")
    cap = [[0] * g.n for _ in range(g.n)]
    for u, v in g.edges:
        cap[u][v] += 1
    flow = 0
    while True:
        prev = [-1] * g.n
        prev[g.s] = g.s
        stack = [g.s]
        while stack and prev[g.t] < 0:
            a = stack.pop()
            for b in range(g.n):
                if cap[a][b] > 0 and prev[b] < 0:
                    prev[b] = a
                    stack.append(b)
        if prev[g.t] < 0:
            return flow
        b = g.t
        while b != g.s:
            a = prev[b]
            cap[a][b] -= 1
            cap[b][a] += 1
            b = a
        flow += 1


def mincut_exhaustive(g: GraphInstance) -> int:
    """Smallest edge subset whose removal disconnects s from t."""
    E = list(g.edges)
    for k in range(len(E) + 1):
        for rem in itertools.combinations(range(len(E)), k):
            drop = set(rem)
            if not reachable(g.n, [e for i, e in enumerate(E) if i not in drop], g.s, g.t):
                return k
    return len(E)
