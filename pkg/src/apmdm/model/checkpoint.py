"""Checkpoints: an npz archive with a JSON header and named tensors."""

from __future__ import annotations

import json

import numpy as np
import torch

from ..core import ContractError
from .config import ModelConfig
from .net import Denoiser

FORMAT = "apmdm-ckpt"
VERSION = 1


def save(model: Denoiser, path, extra: dict = None):
    header = {"format": FORMAT, "version": VERSION, "config": model.cfg.to_dict(),
              "extra": extra or {}}
    arrays = {f"param/{k}": v.detach().cpu().numpy() for k, v in model.state_dict().items()}
    with open(path, "wb") as f:
        np.savez(f, __header__=np.frombuffer(json.dumps(header).encode(), dtype=np.uint8), **arrays)


def load(path) -> tuple:
    """-> (model, header)"""
    with np.load(path, allow_pickle=False) as z:
        if "__header__" not in z.files:
            raise ContractError(f"{path} is not a checkpoint")
        header = json.loads(bytes(z["__header__"]).decode())
        if header.get("format") != FORMAT:
            raise ContractError(f"{path} is not a checkpoint")
        if header.get("version") != VERSION:
            raise ContractError(f"unsupported checkpoint version {header.get('version')}")
        state = {k[len("param/"):]: torch.from_numpy(z[k].copy()) for k in z.files if k.startswith("param/")}
    model = Denoiser(ModelConfig.from_dict(header["config"]))
    model.load_state_dict(state)
    return model.eval(), header
