"""Nesterov accelerated gradient descent with a step learning-rate schedule."""

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np


@dataclass
class OptimizerConfig:
    """Optimizer hyperparameters."""
    base_lr: float = 0.01
    decay_factor: float = 10.0
    decay_every_epochs: int = 10
    momentum: float = 0.9
    l2_weight: float = 5e-4
    epochs: int = 30
    dropout_rate: float = 0.5
    batch_size: int = 64

    def __post_init__(self) -> None:
        if self.base_lr <= 0 or self.decay_factor <= 0:
            raise ValueError("base_lr and decay_factor must be positive")
        if self.decay_every_epochs < 1 or self.epochs < 1 or self.batch_size < 1:
            raise ValueError("decay_every_epochs, epochs and batch_size must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must be in [0, 1)")
        if self.l2_weight < 0:
            raise ValueError("l2_weight must be nonnegative")
        if not 0 <= self.dropout_rate < 1:
            raise ValueError("dropout_rate must be in [0, 1)")


def learning_rate(config: OptimizerConfig, epoch: int) -> float:
    """Learning rate for a 1-based epoch: base_lr / decay_factor^floor((e-1)/decay_every)."""
    if epoch < 1:
        raise ValueError(f"epochs are 1-based, got {epoch}")
    return config.base_lr / config.decay_factor ** ((epoch - 1) // config.decay_every_epochs)


class NonFiniteGradientError(FloatingPointError):
    """A gradient contains NaN or infinity."""

    def __init__(self, index: int):
        self.index = index
        super().__init__(f"non-finite gradient for parameter tensor {index}")


def nesterov_step(params: Sequence[np.ndarray], velocities: Sequence[np.ndarray],
                  gradients: Sequence[np.ndarray], lr: float, momentum: float) -> None:
    """Update parameters and velocities in place.

    v <- momentum*v - lr*g;  w <- w + momentum*v - lr*g

    Raises:
        NonFiniteGradientError: before any update when a gradient is not finite.
        ValueError: when shapes disagree.
    """
    if not len(params) == len(velocities) == len(gradients):
        raise ValueError("params, velocities and gradients must have equal length")
    for index, (param, velocity, grad) in enumerate(zip(params, velocities, gradients)):
        if param.shape != velocity.shape or param.shape != grad.shape:
            raise ValueError(
                f"shape mismatch for tensor {index}: {param.shape}, {velocity.shape}, {grad.shape}"
            )
        if not np.all(np.isfinite(grad)):
            raise NonFiniteGradientError(index)

    for param, velocity, grad in zip(params, velocities, gradients):
        step = lr * grad.astype(param.dtype, copy=False)
        velocity *= momentum
        velocity -= step
        param += momentum * velocity - step


def zero_velocities(params: Sequence[np.ndarray]) -> List[np.ndarray]:
    return [np.zeros_like(p) for p in params]
