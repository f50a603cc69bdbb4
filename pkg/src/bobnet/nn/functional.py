"""Stateless network operations on numpy arrays.

Feature maps are ``(C, H, W)`` for a single slice or ``(B, C, H, W)`` for a
batch. Convolution is cross-correlation (kernels are not flipped) with one
pixel of zero padding, so spatial size only changes in the pooling layers.
"""

from typing import Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

SPP_LEVELS: Tuple[int, ...] = (4, 2, 1)
SPP_BINS = sum(n * n for n in SPP_LEVELS)
LOG_CLAMP = 1e-12


def _as_batch(x: np.ndarray, name: str = "input") -> Tuple[np.ndarray, bool]:
    if x.ndim == 3:
        return x[np.newaxis], True
    if x.ndim == 4:
        return x, False
    raise ValueError(f"{name} must have shape (C, H, W) or (B, C, H, W), got {x.shape}")


def im2col3x3(padded: np.ndarray) -> np.ndarray:
    """Unfold a zero-padded batch ``(B, C, H+2, W+2)`` into ``(B*H*W, C*9)`` columns."""
    batch, channels = padded.shape[:2]
    windows = sliding_window_view(padded, (3, 3), axis=(2, 3))  # (B, C, H, W, 3, 3)
    height, width = windows.shape[2:4]
    return windows.transpose(0, 2, 3, 1, 4, 5).reshape(batch * height * width, channels * 9)


def correlate3x3(x: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Same-size 3x3 cross-correlation of a batch, without bias."""
    batch, _, height, width = x.shape
    out_channels = weights.shape[0]
    padded = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    cols = im2col3x3(padded)
    out = cols @ weights.reshape(out_channels, -1).T
    return out.reshape(batch, height, width, out_channels).transpose(0, 3, 1, 2)


def conv3x3_forward(x: np.ndarray, weights: np.ndarray, biases: np.ndarray) -> np.ndarray:
    """Zero-padded 3x3 convolution preserving spatial size.

    Args:
        x: ``(C_in, H, W)`` or ``(B, C_in, H, W)``
        weights: ``(C_out, C_in, 3, 3)``
        biases: ``(C_out,)``

    Raises:
        ValueError: channel mismatch, non-3x3 kernels or H, W < 3.
    """
    batch, single = _as_batch(x)
    if weights.ndim != 4 or weights.shape[2:] != (3, 3):
        raise ValueError(f"weights must have shape (C_out, C_in, 3, 3), got {weights.shape}")
    if batch.shape[1] != weights.shape[1]:
        raise ValueError(
            f"input has {batch.shape[1]} channels but weights expect {weights.shape[1]}"
        )
    if biases.shape != (weights.shape[0],):
        raise ValueError(f"biases must have shape ({weights.shape[0]},), got {biases.shape}")
    if batch.shape[2] < 3 or batch.shape[3] < 3:
        raise ValueError(f"spatial size must be at least 3x3, got {batch.shape[2:]}")

    out = correlate3x3(batch, weights) + biases[np.newaxis, :, np.newaxis, np.newaxis]
    return out[0] if single else out


def relu_forward(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def maxpool2x2_forward(x: np.ndarray) -> np.ndarray:
    """Non-overlapping 2x2 max pooling; an odd trailing row or column is dropped."""
    batch, single = _as_batch(x)
    b, c, h, w = batch.shape
    if h < 2 or w < 2:
        raise ValueError(f"spatial size must be at least 2x2, got {(h, w)}")
    h2, w2 = h // 2, w // 2
    out = batch[:, :, :2 * h2, :2 * w2].reshape(b, c, h2, 2, w2, 2).max(axis=(3, 5))
    return out[0] if single else out


def spp_bins(size: int, grid: int) -> Sequence[Tuple[int, int]]:
    """Half-open index ranges of the ``grid`` bins along an axis of ``size`` pixels."""
    return [
        ((r * size) // grid, -((-(r + 1) * size) // grid))
        for r in range(grid)
    ]


def spp_forward(x: np.ndarray, levels: Sequence[int] = SPP_LEVELS) -> np.ndarray:
    """Spatial pyramid max pooling to a fixed-length vector.

    Bin ``(r, c)`` of an ``n x n`` grid spans rows ``[floor(r*H/n), ceil((r+1)*H/n))``
    and the analogous columns. Output is ``21*C`` long for the default pyramid,
    ordered channel-major, then grid 4 (row-major), grid 2, grid 1.
    """
    batch, single = _as_batch(x)
    b, c, h, w = batch.shape
    largest = max(levels)
    if h < largest or w < largest:
        raise ValueError(f"spatial size must be at least {largest}x{largest}, got {(h, w)}")

    pooled = []
    for grid in levels:
        for r0, r1 in spp_bins(h, grid):
            for c0, c1 in spp_bins(w, grid):
                pooled.append(batch[:, :, r0:r1, c0:c1].max(axis=(2, 3)))
    out = np.stack(pooled, axis=2).reshape(b, c * len(pooled))
    return out[0] if single else out


def paired_softmax(logits: np.ndarray) -> np.ndarray:
    """Softmax over each consecutive (presence, absence) pair of the last axis."""
    logits = np.asarray(logits)
    if logits.shape[-1] == 0 or logits.shape[-1] % 2:
        raise ValueError(f"paired softmax needs an even, nonzero length, got {logits.shape[-1]}")
    pairs = logits.reshape(logits.shape[:-1] + (-1, 2))
    shifted = pairs - pairs.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return (exp / exp.sum(axis=-1, keepdims=True)).reshape(logits.shape)


def pair_targets(labels: np.ndarray, dtype: type = np.float64) -> np.ndarray:
    """One-hot pair targets ``(..., 2N)`` from presence labels ``(..., N)``."""
    present = np.asarray(labels, dtype=bool)
    targets = np.stack([present, ~present], axis=-1).astype(dtype)
    return targets.reshape(present.shape[:-1] + (2 * present.shape[-1],))


def cross_entropy_paired(probs: np.ndarray, labels: Sequence[bool]) -> float:
    """Summed cross-entropy of one paired-softmax output against N presence labels."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    if probs.shape != (2 * labels.shape[0],):
        raise ValueError(f"expected {2 * labels.shape[0]} probabilities, got {probs.shape}")
    picked = np.where(labels, probs[0::2], probs[1::2])
    return float(-np.log(np.maximum(picked, LOG_CLAMP)).sum())


def dropout_apply(x: np.ndarray, rate: float, rng: np.random.Generator,
                  training: bool) -> np.ndarray:
    """Inverted dropout: survivors are scaled by 1/(1-rate) so inference is the identity."""
    return dropout_with_mask(x, rate, rng, training)[0]


def dropout_with_mask(x: np.ndarray, rate: float, rng: np.random.Generator,
                      training: bool) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    if not 0 <= rate < 1:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0:
        return x, None
    mask = (rng.random(x.shape) >= rate).astype(x.dtype) / x.dtype.type(1 - rate)
    return x * mask, mask
