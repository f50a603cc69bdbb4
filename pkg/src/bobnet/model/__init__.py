"""BoBNet architecture and checkpoints."""

from .bobnet import BoBNet, ModelSpec, ParameterSet, build_bobnet, loss_and_gradients
from .checkpoint import load_checkpoint, load_training_spacing, save_checkpoint

__all__ = [
    "BoBNet",
    "ModelSpec",
    "ParameterSet",
    "build_bobnet",
    "loss_and_gradients",
    "load_checkpoint",
    "load_training_spacing",
    "save_checkpoint",
]
