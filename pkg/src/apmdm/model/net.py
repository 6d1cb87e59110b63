"""A small bidirectional encoder with an unmask head and three control heads."""

from __future__ import annotations

import math

import numpy as np
import torch
from torch import nn
import torch.nn.functional as F

from ..core import ContractError
from .config import ModelConfig


def rope_tables(n: int, dh: int, dtype=torch.float32):
    inv = 1.0 / (10000 ** (torch.arange(0, dh, 2, dtype=torch.float64) / dh))
    ang = torch.arange(n, dtype=torch.float64)[:, None] * inv[None, :]
    return ang.cos().to(dtype), ang.sin().to(dtype)


def apply_rope(x, cos, sin):
    # x: (B, H, L, dh), rotate interleaved pairs
    x1, x2 = x[..., 0::2], x[..., 1::2]
    out = torch.stack((x1 * cos - x2 * sin, x1 * sin + x2 * cos), dim=-1)
    return out.flatten(-2)


class Block(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.h, self.dh = cfg.heads, cfg.d // cfg.heads
        self.ln1 = nn.LayerNorm(cfg.d)
        self.qkv = nn.Linear(cfg.d, 3 * cfg.d)
        self.o = nn.Linear(cfg.d, cfg.d)
        self.ln2 = nn.LayerNorm(cfg.d)
        self.ff1 = nn.Linear(cfg.d, cfg.ff)
        self.ff2 = nn.Linear(cfg.ff, cfg.d)
        self.rope = cfg.pos == "rope"

    def forward(self, h, keep, rope=None):
        B, L, d = h.shape
        q, k, v = self.qkv(self.ln1(h)).view(B, L, 3, self.h, self.dh).permute(2, 0, 3, 1, 4)
        if self.rope:
            q, k = apply_rope(q, *rope), apply_rope(k, *rope)
        att = (q @ k.transpose(-1, -2)) / math.sqrt(self.dh)
        att = att.masked_fill(~keep[:, None, None, :], float("-inf"))
        a = torch.softmax(att, dim=-1) @ v
        h = h + self.o(a.transpose(1, 2).reshape(B, L, d))
        return h + self.ff2(F.gelu(self.ff1(self.ln2(h))))


class Denoiser(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.emb = nn.Embedding(cfg.vocab_size, cfg.d)
        self.pos = nn.Embedding(cfg.max_len, cfg.d) if cfg.pos == "learned" else None
        self.blocks = nn.ModuleList(Block(cfg) for _ in range(cfg.layers))
        self.ln = nn.LayerNorm(cfg.d)
        self.unmask = nn.Linear(cfg.d, cfg.vocab_size)
        self.ctrl = nn.Linear(cfg.d, 3)  # remask, insert, delete heads side by side

    def forward(self, tokens, keep=None):
        """tokens (B, L) -> token logits (B, L, V), control logits (B, L, 3)."""
        B, L = tokens.shape
        if L > self.cfg.max_len:
            raise ContractError(f"length {L} exceeds max_len {self.cfg.max_len}")
        if keep is None:
            keep = torch.ones(B, L, dtype=torch.bool, device=tokens.device)
        h = self.emb(tokens)
        if self.pos is not None:
            h = h + self.pos(torch.arange(L, device=tokens.device))[None]
        rope = rope_tables(L, self.cfg.d // self.cfg.heads, h.dtype) if self.cfg.pos == "rope" else None
        for blk in self.blocks:
            h = blk(h, keep, rope)
        h = self.ln(h)
        return self.unmask(h), self.ctrl(h)


def build(cfg: ModelConfig, seed: int = 0) -> Denoiser:
    torch.manual_seed(seed)
    return Denoiser(cfg)


def n_params(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


@torch.no_grad()
def forward(model: Denoiser, x) -> tuple:
    """Single state -> (token logits (L, V), control probabilities (L, 3)) as numpy."""
    t = torch.as_tensor(np.asarray(x, dtype=np.int64))[None]
    logits, ctrl = model(t)
    return logits[0].double().numpy(), torch.sigmoid(ctrl[0].double()).numpy()
