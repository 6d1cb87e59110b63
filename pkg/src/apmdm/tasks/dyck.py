"""Two-sided Dyck-k sampling by inserting cancelling pairs.

Tokens a1+ a1- ... ak+ ak-; x0 = BOS. A round either grows the string,
inserting M1 in random gaps (each M1 then becomes a uniform bracket and
inserts an M2 that resolves to its inverse), or ends it with a terminal M2
after the last token, decoded as EOS. Growing rounds leave an odd-length
state with pending M2s, the ending round an even-length one, which is how
the policy tells a terminal M2 from a matching one.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..core import ZERO, ContractError, DenoiserOutput, StopCriterion, Vocab, apply_transition, decode
from .common import Recorder, Trajectory

GROW, PAIR = (0, 1, 0), (0, 2, 0)


@dataclass(frozen=True)
class DyckConfig:
    k: int = 2
    p: float = 0.2  # M1 insertion probability per gap
    q: float = 0.3  # probability that a round ends the string
    max_len: int = 64

    def __post_init__(self):
        if self.k < 2:
            raise ContractError("k must be at least 2")
        if not (0 < self.p < 1 and 0 < self.q < 1):
            raise ContractError("p and q must lie in (0, 1)")
        if self.max_len < 0:
            raise ContractError("max_len must be nonnegative")


def brackets(k: int) -> list:
    return [f"a{i}{s}" for i in range(1, k + 1) for s in "+-"]


def inverse(name: str) -> str:
    return name[:-1] + ("-" if name[-1] == "+" else "+")


def make_vocab(k: int) -> Vocab:
    return Vocab(["BOS", "EOS"] + brackets(k) + ["M1", "M2"], mask_tokens=("M1", "M2"),
                 special={"bos": "BOS", "eos": "EOS"})


def dyck_check(s, k: int):
    """(member, diagnosis) by repeated adjacent-pair elimination."""
    alpha = set(brackets(k))
    w = list(s)
    for t in w:
        if t not in alpha:
            return False, f"foreign symbol {t!r}"
    changed = True
    while changed:
        changed = False
        i = 0
        while i + 1 < len(w):
            if w[i + 1] == inverse(w[i]):
                del w[i:i + 2]
                changed = True
                i = max(i - 1, 0)
            else:
                i += 1
    return (not w), ("" if not w else f"irreducible remainder of length {len(w)}")


def dyck_member(s, k: int) -> bool:
    return dyck_check(s, k)[0]


# choose("grow", n) -> (end, [insert M1 after gap i]); choose("bracket", i) -> name
Chooser = Callable[[str, int], object]


def rng_chooser(cfg: DyckConfig, rng: np.random.Generator) -> Chooser:
    names = brackets(cfg.k)

    def choose(kind, arg):
        if kind == "bracket":
            return names[int(rng.integers(len(names)))]
        if rng.random() < cfg.q:
            return True, [False] * arg
        while True:
            ins = [bool(rng.random() < cfg.p) for _ in range(arg)]
            if any(ins):
                return False, ins

    return choose


def policy(x, vocab: Vocab, choose: Chooser) -> DenoiserOutput:
    names = vocab.names(x)
    fill = vocab.base_ids[0]
    y = [fill if vocab.is_mask(t) else t for t in x]
    c = [ZERO] * len(x)
    if "M1" in names:
        for i, n in enumerate(names):
            if n == "M1":
                y[i] = vocab.id(choose("bracket", i))
                c[i] = PAIR
        return DenoiserOutput(tuple(y), tuple(c))
    if "M2" in names:
        if len(x) % 2 == 0:
            y[-1] = vocab.id("EOS")
        else:
            for i, n in enumerate(names):
                if n == "M2":
                    y[i] = vocab.id(inverse(names[i - 1]))
        return DenoiserOutput(tuple(y), tuple(c))
    if names[-1] == "EOS":
        return DenoiserOutput(tuple(y), tuple(c))
    end, ins = choose("grow", len(x))
    if end:
        c[-1] = PAIR
    else:
        c = [GROW if b else ZERO for b in ins]
    return DenoiserOutput(tuple(y), tuple(c))


def dyck_denoiser(cfg: DyckConfig, vocab: Optional[Vocab] = None):
    """A Denoiser drawing its choices from the decode loop's generator.

    States longer than max_len + 2 are left alone, so decoding halts there.
    """
    vocab = vocab or make_vocab(cfg.k)

    def den(x, rng=None):
        if len(x) > cfg.max_len + 2:
            fill = vocab.base_ids[0]
            return DenoiserOutput(tuple(fill if vocab.is_mask(t) else t for t in x), (ZERO,) * len(x))
        rng = rng if rng is not None else np.random.default_rng(0)
        return policy(x, vocab, rng_chooser(cfg, rng))

    return den


@dataclass
class DyckSample:
    tokens: list
    steps: int
    resampled: int  # attempts discarded for exceeding max_len


def dyck_sample(cfg: DyckConfig, rng: np.random.Generator, max_attempts: int = 1000) -> DyckSample:
    vocab = make_vocab(cfg.k)
    den = dyck_denoiser(cfg, vocab)
    for attempt in range(max_attempts):
        seed = int(rng.integers(2**63 - 1))
        stop = StopCriterion("fixpoint", max_steps=3 * cfg.max_len + 6)
        tr = decode(den, (vocab.id("BOS"),), stop, seed=seed, vocab=vocab)
        names = vocab.names(tr.final)
        if tr.stop_reason == "fixpoint" and names[-1] == "EOS":
            return DyckSample(names[1:-1], len(tr) - 1, attempt)
    raise ContractError("max_len exceeded on every attempt")


def dyck_trajectory(cfg: DyckConfig, rng: np.random.Generator) -> Trajectory:
    vocab = make_vocab(cfg.k)
    choose = rng_chooser(cfg, rng)
    return _record(vocab, choose, cfg.max_len + 2)


def _record(vocab: Vocab, choose: Chooser, max_len: int) -> Trajectory:
    rec = Recorder("dyck", vocab, (vocab.id("BOS"),))
    while True:
        out = policy(rec.x, vocab, choose)
        if apply_transition(rec.x, out, vocab) == rec.x:
            break
        rec.step(out.y, out.controls)
        if len(rec.x) > max_len + 2:
            rec.tr.meta["overflow"] = True
            break
    return rec.tr


# -------------------------------------------------------------- reachability


def derivation(w, k: int) -> Optional[list]:
    """Single-pair insertions (gap, bracket) building w from the empty word."""
    w = tuple(w)
    if not dyck_member(w, k):
        return None
    prev = {(): None}
    queue = deque([()])
    while queue:
        u = queue.popleft()
        if u == w:
            break
        if len(u) + 2 > len(w):
            continue
        for g in range(len(u) + 1):
            for b in brackets(k):
                v = u[:g] + (b, inverse(b)) + u[g:]
                if v not in prev and _subseq(v, w):
                    prev[v] = (u, g, b)
                    queue.append(v)
    if w not in prev:
        return None
    moves, u = [], w
    while prev[u] is not None:
        u, g, b = prev[u]
        moves.append((g, b))
    return moves[::-1]


def _subseq(v, w) -> bool:
    it = iter(w)
    return all(t in it for t in v)


def witness(w, k: int) -> Optional[Trajectory]:
    """A trajectory of the sampling policy ending in BOS w EOS, or None."""
    moves = derivation(w, k)
    if moves is None:
        return None
    vocab = make_vocab(k)
    plan = deque(moves)

    def choose(kind, arg):
        if kind == "bracket":
            return plan[0][1]
        if not plan:
            return True, [False] * arg
        # gap g of the word is the slot after token g (BOS is token 0)
        g = plan[0][0]
        return False, [i == g for i in range(arg)]

    rec = Recorder("dyck", vocab, (vocab.id("BOS"),), {"target": list(w)})
    while True:
        out = policy(rec.x, vocab, choose)
        if apply_transition(rec.x, out, vocab) == rec.x:
            break
        was_bracket = "M1" in vocab.names(rec.x)
        rec.step(out.y, out.controls)
        if was_bracket:
            plan.popleft()
    return rec.tr
