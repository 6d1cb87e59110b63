"""Batching of step tuples and the combined supervised objective."""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F

from ..core import Vocab


@dataclass
class Batch:
    tokens: torch.Tensor  # (B, L) padded with the mask id
    keep: torch.Tensor  # (B, L) real positions
    target: torch.Tensor  # (B, L) y*
    masked: torch.Tensor  # (B, L) real positions holding a mask in x
    ctrl: torch.Tensor  # (B, L, 3) float labels

    def __len__(self):
        return self.tokens.shape[0]


def collate(tuples, vocab: Vocab) -> Batch:
    B = len(tuples)
    L = max(1, max(len(t.x) for t in tuples))
    pad = vocab.mask
    tokens = torch.full((B, L), pad, dtype=torch.long)
    target = torch.zeros((B, L), dtype=torch.long)
    keep = torch.zeros((B, L), dtype=torch.bool)
    ctrl = torch.zeros((B, L, 3))
    for b, t in enumerate(tuples):
        n = len(t.x)
        if not n:
            continue
        tokens[b, :n] = torch.tensor(t.x)
        target[b, :n] = torch.tensor(t.y)
        keep[b, :n] = True
        ctrl[b, :n] = (torch.tensor(t.c, dtype=torch.float) > 0).float()
    masks = torch.tensor(sorted(vocab.mask_ids))
    masked = keep & torch.isin(tokens, masks)
    return Batch(tokens, keep, target, masked, ctrl)


def supervised_loss(logits, ctrl_logits, batch: Batch, lambdas=(1.0, 1.0, 1.0)):
    """L_unmask + sum_k lambda_k L_k; returns (total, per-term floats).

    The unmask term is cross-entropy over masked positions only (0 if none);
    each control term is binary cross-entropy averaged over real positions.
    """
    if batch.masked.any():
        l_u = F.cross_entropy(logits[batch.masked], batch.target[batch.masked])
    else:
        l_u = logits.sum() * 0.0
    n = batch.keep.sum().clamp(min=1)
    bce = F.binary_cross_entropy_with_logits(ctrl_logits, batch.ctrl.to(ctrl_logits.dtype),
                                             reduction="none")
    per = (bce * batch.keep[..., None]).sum(dim=(0, 1)) / n
    total = l_u + sum(lam * per[k] for k, lam in enumerate(lambdas))
    terms = {"unmask": l_u.item(), "remask": per[0].item(), "insert": per[1].item(),
             "delete": per[2].item(), "total": total.item()}
    return total, terms
