"""Minimal feed-forward network engine with analytic gradients."""

from .functional import (
    conv3x3_forward,
    cross_entropy_paired,
    dropout_apply,
    maxpool2x2_forward,
    paired_softmax,
    spp_forward,
)
from .init import glorot_uniform_init
from .optimizer import OptimizerConfig, learning_rate, nesterov_step

__all__ = [
    "conv3x3_forward",
    "cross_entropy_paired",
    "dropout_apply",
    "maxpool2x2_forward",
    "paired_softmax",
    "spp_forward",
    "glorot_uniform_init",
    "OptimizerConfig",
    "learning_rate",
    "nesterov_step",
]
