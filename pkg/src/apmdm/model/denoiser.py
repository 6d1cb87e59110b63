"""A trained network exposed through the Denoiser interface."""

from __future__ import annotations

import math
from typing import Optional

import numpy as np
import torch

from ..core import DenoiserOutput, Vocab
from .net import Denoiser


def _logit(p: float) -> float:
    if p >= 1.0:
        return math.inf
    return math.log(p / (1 - p))


class NeuralDenoiser:
    """argmax tokens over the mask-free alphabet; a control fires when its
    probability reaches the threshold (compared in logit space, so 1.0 never fires)."""

    def __init__(self, model: Denoiser, vocab: Vocab, thresholds=None, cache: bool = False):
        self.model = model.eval()
        self.vocab = vocab
        th = thresholds if thresholds is not None else model.cfg.thresholds
        self.cut = np.array([_logit(float(t)) for t in th])
        self.allowed = np.array(vocab.base_ids)
        self.cache = {} if cache else None

    @torch.no_grad()
    def __call__(self, x, rng=None) -> DenoiserOutput:
        key = tuple(x)
        if self.cache is not None and key in self.cache:
            return self.cache[key]
        if not key:
            return DenoiserOutput((), ())
        t = torch.as_tensor(np.asarray(key, dtype=np.int64))[None]
        logits, ctrl = self.model(t)
        lg = logits[0].double().numpy()[:, self.allowed]
        pr = torch.softmax(torch.as_tensor(lg), dim=-1).numpy()
        y = tuple(int(self.allowed[j]) for j in lg.argmax(axis=1))
        bits = ctrl[0].double().numpy() >= self.cut[None, :]
        controls = tuple(tuple(int(b) for b in row) for row in bits)
        full = np.zeros((len(key), len(self.vocab)))
        full[:, self.allowed] = pr
        out = DenoiserOutput(y, controls, tuple(float(p) for p in pr.max(axis=1)), full)
        if self.cache is not None:
            self.cache[key] = out
        return out


def neural_denoiser(model: Denoiser, vocab: Vocab, thresholds: Optional[tuple] = None,
                    cache: bool = False) -> NeuralDenoiser:
    return NeuralDenoiser(model, vocab, thresholds, cache)
