"""Step tuples, trajectories and their line-delimited file format."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional

from ..core import ContractError, DenoiserOutput, Vocab, apply_transition


@dataclass(frozen=True)
class StepTuple:
    x: tuple
    y: tuple
    c: tuple

    def __post_init__(self):
        if not len(self.x) == len(self.y) == len(self.c):
            raise ContractError("step tuple lengths differ")

    def output(self) -> DenoiserOutput:
        return DenoiserOutput(self.y, self.c)

    def apply(self, vocab: Vocab) -> tuple:
        return apply_transition(self.x, self.output(), vocab)


@dataclass
class Trajectory:
    task: str
    vocab: Vocab
    steps: list = field(default_factory=list)
    x0: Optional[tuple] = None
    meta: dict = field(default_factory=dict)

    @property
    def final(self) -> tuple:
        if not self.steps:
            return self.x0
        return self.steps[-1].apply(self.vocab)

    def states(self) -> list:
        out = [self.x0]
        for s in self.steps:
            out.append(s.apply(self.vocab))
        return out

    def replay_ok(self) -> bool:
        """Every tuple's successor is the next tuple's input."""
        x = self.x0
        for s in self.steps:
            if s.x != x:
                return False
            x = s.apply(self.vocab)
        return True

    def __len__(self):
        return len(self.steps)


class Recorder:
    """Builds a trajectory by applying outputs to a running state."""

    def __init__(self, task: str, vocab: Vocab, x0, meta=None):
        self.tr = Trajectory(task, vocab, [], tuple(x0), dict(meta or {}))
        self.x = tuple(x0)

    def step(self, y, c) -> tuple:
        t = StepTuple(self.x, tuple(y), tuple(tuple(ci) for ci in c))
        self.tr.steps.append(t)
        self.x = t.apply(self.tr.vocab)
        return self.x


def to_records(trs: Iterable[Trajectory], start_episode: int = 0) -> Iterable[dict]:
    for ep, tr in enumerate(trs, start=start_episode):
        names = tr.vocab.names
        for k, s in enumerate(tr.steps):
            yield {"episode": ep, "step": k, "x": names(s.x), "y": names(s.y),
                   "c": [list(ci) for ci in s.c], "task": tr.task, "meta": tr.meta}


def write_jsonl(path, trs: Iterable[Trajectory]) -> int:
    n = 0
    with open(path, "w") as f:
        for rec in to_records(trs):
            f.write(json.dumps(rec) + "\n")
            n += 1
    return n


def read_jsonl(path, vocab: Vocab) -> list:
    """Trajectories back from a file, grouped by episode in file order."""
    eps: dict = {}
    with open(path) as f:
        for line in f:
            if not line.strip():
                continue
            r = json.loads(line)
            st = StepTuple(vocab.ids(r["x"]), vocab.ids(r["y"]), tuple(tuple(c) for c in r["c"]))
            tr = eps.setdefault(r["episode"], Trajectory(r["task"], vocab, [], st.x, r.get("meta", {})))
            tr.steps.append(st)
    return list(eps.values())
