"""Any-process generation: transition function, decode loop, restricted modes."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

State = tuple  # tuple[int, ...] of vocab indices
Ctrl = tuple  # (remask, insert, delete) per position

ZERO: Ctrl = (0, 0, 0)


class ContractError(ValueError):
    pass


@dataclass(frozen=True)
class Vocab:
    symbols: tuple
    mask_tokens: tuple = ("M",)
    special: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(self.symbols))
        object.__setattr__(self, "mask_tokens", tuple(self.mask_tokens))
        if len(set(self.symbols)) != len(self.symbols):
            raise ContractError("duplicate token names")
        if not 1 <= len(self.mask_tokens) <= 2:
            raise ContractError("one or two mask tokens required")
        for m in self.mask_tokens:
            if m not in self.symbols:
                raise ContractError(f"mask token {m!r} not in symbols")
        index = {s: i for i, s in enumerate(self.symbols)}
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_masks", frozenset(index[m] for m in self.mask_tokens))

    def __len__(self):
        return len(self.symbols)

    def id(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise ContractError(f"unknown token {name!r}") from None

    def ids(self, names: Iterable[str]) -> State:
        return tuple(self.id(n) for n in names)

    def names(self, ids: Iterable[int]) -> list:
        return [self.symbols[i] for i in ids]

    @property
    def mask(self) -> int:
        return self.id(self.mask_tokens[0])

    @property
    def mask_ids(self) -> frozenset:
        return self._masks

    def is_mask(self, i: int) -> bool:
        return i in self._masks

    @property
    def base_ids(self) -> tuple:
        """Indices of the mask-free alphabet, in vocabulary order."""
        return tuple(i for i in range(len(self.symbols)) if i not in self._masks)

    def insert_token(self, code: int) -> int:
        # insert bit 1 appends the primary mask, 2 the secondary one
        return self.id(self.mask_tokens[code - 1])


@dataclass(frozen=True)
class DenoiserOutput:
    y: tuple
    controls: tuple
    confidences: Optional[tuple] = None
    probs: Optional[np.ndarray] = None  # per-position distribution over the vocab

    def __len__(self):
        return len(self.y)


def zero_output(x: State, vocab: Vocab) -> DenoiserOutput:
    """Identity proposal: keep every token, unmask nothing meaningful."""
    fill = vocab.base_ids[0]
    y = tuple(fill if vocab.is_mask(t) else t for t in x)
    return DenoiserOutput(y, (ZERO,) * len(x))


def _check(x: State, out: DenoiserOutput, vocab: Vocab):
    if len(out.y) != len(x) or len(out.controls) != len(x):
        raise ContractError(f"length mismatch: |x|={len(x)} |y|={len(out.y)} |c|={len(out.controls)}")
    for t in out.y:
        if vocab.is_mask(t):
            raise ContractError("y contains a mask token")


def apply_transition(x: State, out: DenoiserOutput, vocab: Vocab) -> State:
    """One any-process step g(x, y, c).

    A deleted mask contributes nothing, not even its insert. The insert
    field may be 2 to append the secondary mask (two-mask vocabularies).
    """
    _check(x, out, vocab)
    m = vocab.mask
    res = []
    for xi, yi, (r, ins, d) in zip(x, out.y, out.controls):
        is_m = vocab.is_mask(xi)
        if is_m and d:
            continue
        if r:
            res.append(m)
        elif is_m:
            res.append(yi)
        else:
            res.append(xi)
        if ins:
            res.append(vocab.insert_token(ins))
    return tuple(res)


# ---------------------------------------------------------------- decoding

STOP_KINDS = ("fixpoint", "end-token", "all-unmasked", "max-steps")


@dataclass(frozen=True)
class StopCriterion:
    kind: str = "fixpoint"
    end_token: Optional[str] = None
    max_steps: int = 10_000

    def __post_init__(self):
        if self.kind not in STOP_KINDS:
            raise ContractError(f"unknown stop kind {self.kind!r}")
        if self.max_steps <= 0:
            raise ContractError("max_steps must be positive")
        if self.kind == "end-token" and self.end_token is None:
            raise ContractError("end-token stop needs end_token")


Denoiser = Callable[[State, np.random.Generator], DenoiserOutput]


@dataclass
class Trace:
    states: list
    outputs: list
    stop_reason: str
    vocab: Vocab
    mode: str = "ap"

    @property
    def final(self) -> State:
        return self.states[-1]

    @property
    def truncated(self) -> bool:
        return self.stop_reason == "truncated"

    def __len__(self):
        return len(self.outputs)

    def replay_ok(self) -> bool:
        return all(step(a, o, self.vocab, self.mode) == b
                   for a, o, b in zip(self.states, self.outputs, self.states[1:]))

    def to_jsonl(self) -> str:
        v = self.vocab
        lines = []
        n = len(self.outputs)
        for k, (x, o) in enumerate(zip(self.states, self.outputs)):
            rec = {"step": k, "x": v.names(x), "y": v.names(o.y), "c": [list(c) for c in o.controls]}
            if k == n - 1:
                rec["stop_reason"] = self.stop_reason
            lines.append(json.dumps(rec))
        if n == 0:
            lines.append(json.dumps({"step": 0, "x": v.names(self.states[0]), "y": [], "c": [],
                                     "stop_reason": self.stop_reason}))
        return "\n".join(lines) + "\n"


def step(x: State, out: DenoiserOutput, vocab: Vocab, mode: str = "ap") -> State:
    if mode == "rewrite":
        _check(x, out, vocab)
        return rewrite_step(x, out.y, [c[0] for c in out.controls])
    return apply_transition(x, out, vocab)


def _satisfied(stop: StopCriterion, x: State, vocab: Vocab) -> bool:
    if stop.kind == "end-token":
        return vocab.id(stop.end_token) in x
    if stop.kind == "all-unmasked":
        return not any(vocab.is_mask(t) for t in x)
    return False


def decode(denoiser: Denoiser, x0: Sequence[int], stop: StopCriterion, seed: int,
           vocab: Vocab, mode: str = "ap") -> Trace:
    """Iterate x <- g(f(x)) until the stop criterion holds.

    mode "rewrite" reads the remask bit as the rewrite signal and applies
    rewrite_step instead of the any-process transition.
    """
    x = tuple(x0)
    if not x:
        raise ContractError("x0 must be nonempty")
    rng = np.random.default_rng(seed)
    states, outputs = [x], []
    if _satisfied(stop, x, vocab):
        return Trace(states, outputs, stop.kind, vocab, mode)
    for _ in range(stop.max_steps):
        out = denoiser(x, rng)
        nxt = step(x, out, vocab, mode)
        outputs.append(out)
        states.append(nxt)
        if stop.kind == "fixpoint" and nxt == x:
            return Trace(states, outputs, "fixpoint", vocab, mode)
        x = nxt
        if _satisfied(stop, x, vocab):
            return Trace(states, outputs, stop.kind, vocab, mode)
    reason = "max-steps" if stop.kind == "max-steps" else "truncated"
    return Trace(states, outputs, reason, vocab, mode)


# ---------------------------------------------------------------- AO mode

POLICIES = ("top-prob", "top-prob-margin", "left-to-right")


def _confidence(out: DenoiserOutput, i: int, policy: str, vocab: Vocab) -> float:
    if out.probs is not None:
        p = np.asarray(out.probs[i], dtype=float).copy()
        p[list(vocab.mask_ids)] = -np.inf
        top = np.sort(p)[::-1]
        if policy == "top-prob-margin":
            return float(top[0] - top[1]) if len(top) > 1 else float(top[0])
        return float(top[0])
    if out.confidences is None:
        raise ContractError(f"policy {policy!r} needs confidences")
    return float(out.confidences[i])


def ao_constrain(out: DenoiserOutput, x: State, k: Optional[int], policy: str,
                 vocab: Vocab) -> DenoiserOutput:
    """Restrict a proposal to unmasking k selected masks.

    Unselected masks get the remask bit so they stay masked under the
    transition; nothing else carries a control bit. Positions with zero
    confidence are never selected. k=None selects every eligible mask.
    """
    if policy not in POLICIES:
        raise ContractError(f"unknown policy {policy!r}")
    if k is not None and k < 1:
        raise ContractError("k must be >= 1")
    _check(x, out, vocab)
    masked = [i for i, t in enumerate(x) if vocab.is_mask(t)]
    if policy == "left-to-right":
        chosen = masked if k is None else masked[:k]
    else:
        scored = [(i, _confidence(out, i, policy, vocab)) for i in masked]
        scored = [(i, s) for i, s in scored if s > 0]
        scored.sort(key=lambda t: (-t[1], t[0]))
        chosen = [i for i, _ in (scored if k is None else scored[:k])]
    keep = set(masked) - set(chosen)
    ctrl = tuple((1, 0, 0) if i in keep else ZERO for i in range(len(x)))
    return DenoiserOutput(out.y, ctrl, out.confidences, out.probs)


# ---------------------------------------------------------------- rewrite mode

def rewrite_step(x: Sequence[int], y: Sequence[int], r: Sequence[int]) -> State:
    if not (len(x) == len(y) == len(r)):
        raise ContractError("length mismatch")
    return tuple(yi if ri else xi for xi, yi, ri in zip(x, y, r))


def rewrite_as_apmdm(x: Sequence[int], y: Sequence[int], r: Sequence[int],
                     vocab: Vocab) -> list:
    """Realize one rewrite step as three any-process steps.

    1. insert a mask after every position;
    2. remask every original position, write the kept/new value into the copy;
    3. delete the masks at original positions.
    Masks that must survive (a kept mask) are carried by the remask bit.
    """
    x = tuple(x)
    if not (len(x) == len(y) == len(r)):
        raise ContractError("length mismatch")
    fill = vocab.base_ids[0]

    def safe(t):
        return fill if vocab.is_mask(t) else t

    steps = []
    s1 = DenoiserOutput(tuple(safe(t) for t in x),
                        tuple((1 if vocab.is_mask(t) else 0, 1, 0) for t in x))
    u1 = apply_transition(x, s1, vocab)
    steps.append((x, s1))

    ys, cs = [], []
    for xi, yi, ri in zip(x, y, r):
        ys.append(safe(xi))
        cs.append((1, 0, 0))
        new = yi if ri else xi
        ys.append(safe(new))
        cs.append((1, 0, 0) if vocab.is_mask(new) else ZERO)
    s2 = DenoiserOutput(tuple(ys), tuple(cs))
    u2 = apply_transition(u1, s2, vocab)
    steps.append((u1, s2))

    cs3 = []
    for j, t in enumerate(u2):
        if j % 2 == 0:
            cs3.append((0, 0, 1))
        else:
            cs3.append((1, 0, 0) if vocab.is_mask(t) else ZERO)
    s3 = DenoiserOutput(tuple(safe(t) for t in u2), tuple(cs3))
    steps.append((u2, s3))
    return steps


class ThreeStepRewrite:
    """Run a rewrite denoiser under plain any-process decoding.

    Stateless: the phase is read off the state. Length L is a fresh step;
    length 2L with every inserted slot masked is the middle step (the
    original state sits at the even indices); anything else of length 2L
    is the final deletion. The one ambiguous case, a state made only of
    kept masks, resolves to the middle step.
    """

    def __init__(self, inner: Denoiser, length: int, vocab: Vocab):
        self.inner = inner
        self.length = length
        self.vocab = vocab

    def _plan(self, x, rng):
        out = self.inner(x, rng)
        return rewrite_as_apmdm(x, out.y, [c[0] for c in out.controls], self.vocab)

    def __call__(self, x: State, rng) -> DenoiserOutput:
        v = self.vocab
        if len(x) == self.length:
            return self._plan(x, rng)[0][1]
        if len(x) != 2 * self.length:
            raise ContractError("state length does not match any rewrite phase")
        if all(v.is_mask(x[j]) for j in range(1, len(x), 2)):
            return self._plan(x[0::2], rng)[1][1]
        fill = v.base_ids[0]
        y = tuple(fill if v.is_mask(t) else t for t in x)
        c = tuple((0, 0, 1) if j % 2 == 0 else ((1, 0, 0) if v.is_mask(t) else ZERO)
                  for j, t in enumerate(x))
        return DenoiserOutput(y, c)
