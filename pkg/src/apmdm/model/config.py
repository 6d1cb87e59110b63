"""Model, training and corruption settings."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

from ..core import ContractError

POSITIONS = ("rope", "learned", "none")
CORRUPTIONS = ("unmask-forward", "remask-shuffle", "insert-deflate", "delete-inflate")


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    layers: int = 2
    heads: int = 2
    d: int = 32
    ff_mult: int = 4
    max_len: int = 512
    pos: str = "rope"
    thresholds: tuple = (0.5, 0.5, 0.5)  # remask, insert, delete

    def __post_init__(self):
        if self.d % self.heads:
            raise ContractError("d must be divisible by heads")
        if self.pos not in POSITIONS:
            raise ContractError(f"pos must be one of {POSITIONS}")
        if self.pos == "rope" and (self.d // self.heads) % 2:
            raise ContractError("rotary positions need an even head width")
        if len(self.thresholds) != 3 or not all(0 < t <= 1 for t in self.thresholds):
            raise ContractError("thresholds must be three values in (0, 1]")
        object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))

    @property
    def ff(self) -> int:
        return self.ff_mult * self.d

    def to_dict(self) -> dict:
        d = asdict(self)
        d["thresholds"] = list(self.thresholds)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["thresholds"] = tuple(d.get("thresholds", (0.5, 0.5, 0.5)))
        return cls(**d)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-4
    betas: tuple = (0.9, 0.999)
    weight_decay: float = 0.01
    batch_size: int = 256
    warmup: int = 250
    clip: float = 1.0
    lambdas: tuple = (1.0, 1.0, 1.0)  # remask, insert, delete
    steps: int = 1000
    seed: int = 0
    log_every: int = 50

    def __post_init__(self):
        if self.lr <= 0:
            raise ContractError("learning rate must be positive")
        if any(lam < 0 for lam in self.lambdas):
            raise ContractError("loss weights must be nonnegative")
        if self.batch_size < 1 or self.steps < 0:
            raise ContractError("batch_size >= 1 and steps >= 0 required")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["betas"], d["lambdas"] = list(self.betas), list(self.lambdas)
        return d


@dataclass(frozen=True)
class CorruptionSpec:
    kind: str
    rate: float = 0.5  # alpha_t, delta or gamma depending on kind
    alpha: float = 0.5  # signal ratio for the masking half of delete-inflate
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in CORRUPTIONS:
            raise ContractError(f"kind must be one of {CORRUPTIONS}")
        if not (0 <= self.rate <= 1 and 0 <= self.alpha <= 1):
            raise ContractError("rates must lie in [0, 1]")
