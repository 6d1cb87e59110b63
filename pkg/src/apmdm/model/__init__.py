"""Trainable encoder denoiser: network, losses, corruptions, training, checkpoints."""

from .checkpoint import load, save
from .config import CorruptionSpec, ModelConfig, TrainConfig
from .corrupt import corrupt
from .denoiser import NeuralDenoiser, neural_denoiser
from .loss import Batch, collate, supervised_loss
from .net import Denoiser, build, forward, n_params
from .train import TrainResult, train, tuple_accuracy

__all__ = ["CorruptionSpec", "ModelConfig", "TrainConfig", "corrupt", "NeuralDenoiser",
           "neural_denoiser", "Batch", "collate", "supervised_loss", "Denoiser", "build",
           "forward", "n_params", "TrainResult", "train", "tuple_accuracy", "load", "save"]
