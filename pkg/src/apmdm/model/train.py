"""Supervised training on step tuples."""

from __future__ import annotations

import copy
import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import torch

from ..core import ContractError, Vocab
from .config import ModelConfig, TrainConfig
from .loss import collate, supervised_loss
from .net import Denoiser, build


@dataclass
class TrainResult:
    model: Denoiser
    curves: list = field(default_factory=list)  # (step, term, value)
    steps: int = 0
    diverged: bool = False

    def final(self, term: str = "total") -> float:
        vals = [v for s, t, v in self.curves if t == term]
        return vals[-1] if vals else math.nan

    def write_curves(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["step", "term", "value"])
            w.writerows(self.curves)


def _lr_at(step: int, tc: TrainConfig) -> float:
    # linear warmup, then constant
    return tc.lr * min(1.0, (step + 1) / max(tc.warmup, 1))


def train(data: Sequence, vocab: Vocab, mc: ModelConfig, tc: TrainConfig,
          model: Optional[Denoiser] = None, on_log: Optional[Callable] = None) -> TrainResult:
    """Train on a list of StepTuples (or Trajectories, which are flattened)."""
    tuples = []
    for d in data:
        tuples.extend(d.steps if hasattr(d, "steps") else [d])
    if not tuples:
        raise ContractError("no training tuples")
    if mc.vocab_size != len(vocab):
        raise ContractError("model vocabulary size does not match the data")
    torch.manual_seed(tc.seed)
    model = model or build(mc, tc.seed)
    opt = torch.optim.AdamW(model.parameters(), lr=tc.lr, betas=tuple(tc.betas),
                            weight_decay=tc.weight_decay)
    rng = np.random.default_rng(tc.seed)
    res = TrainResult(model)
    good = copy.deepcopy(model.state_dict())
    order, at = rng.permutation(len(tuples)), 0
    model.train()
    for step in range(tc.steps):
        idx = []
        while len(idx) < min(tc.batch_size, len(tuples)):
            if at == len(order):
                order, at = rng.permutation(len(tuples)), 0
            idx.append(order[at])
            at += 1
        batch = collate([tuples[i] for i in idx], vocab)
        for g in opt.param_groups:
            g["lr"] = _lr_at(step, tc)
        logits, ctrl = model(batch.tokens, batch.keep)
        loss, terms = supervised_loss(logits, ctrl, batch, tc.lambdas)
        if not torch.isfinite(loss):
            model.load_state_dict(good)
            res.diverged = True
            break
        opt.zero_grad()
        loss.backward()
        if tc.clip:
            torch.nn.utils.clip_grad_norm_(model.parameters(), tc.clip)
        opt.step()
        res.steps = step + 1
        if step % tc.log_every == 0 or step == tc.steps - 1:
            good = copy.deepcopy(model.state_dict())
            for k, v in terms.items():
                res.curves.append((step, k, v))
            if on_log:
                on_log(step, terms)
    model.eval()
    return res


@torch.no_grad()
def tuple_accuracy(model: Denoiser, tuples, vocab: Vocab, thresholds=None) -> float:
    """Fraction of tuples whose thresholded prediction reproduces y* and c* exactly."""
    from .denoiser import neural_denoiser

    den = neural_denoiser(model, vocab, thresholds)
    ok = 0
    for t in tuples:
        out = den(t.x)
        cs = tuple((int(r > 0), int(i > 0), int(d > 0)) for r, i, d in t.c)
        ys = all(out.y[j] == t.y[j] for j, xj in enumerate(t.x)
                 if vocab.is_mask(xj) and not t.c[j][0] and not t.c[j][2])
        ok += ys and out.controls == cs
    return ok / max(len(tuples), 1)
