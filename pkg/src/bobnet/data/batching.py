"""Variable-size training minibatches."""

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from bobnet.data.slicing import FILL_VALUE, LabeledSlice


def nearest_rank(values: Sequence[int], q: float) -> int:
    """Nearest-rank quantile: the ``ceil(q*n)``-th smallest value (1-based)."""
    if not values:
        raise ValueError("nearest_rank of an empty sequence")
    if not 0 < q <= 1:
        raise ValueError(f"quantile must be in (0, 1], got {q}")
    ordered = sorted(values)
    return ordered[max(math.ceil(q * len(ordered)), 1) - 1]


@dataclass(frozen=True)
class MinibatchPlan:
    """Quartiles of a batch and the chosen target size."""
    height_quartiles: Tuple[int, int]
    width_quartiles: Tuple[int, int]
    target: Tuple[int, int]


def plan_minibatch(shapes: Sequence[Tuple[int, int]], rng: np.random.Generator,
                   min_input: int = 224) -> MinibatchPlan:
    heights = [h for h, _ in shapes]
    widths = [w for _, w in shapes]
    height_q = (nearest_rank(heights, 0.25), nearest_rank(heights, 0.75))
    width_q = (nearest_rank(widths, 0.25), nearest_rank(widths, 0.75))
    target = (
        max(height_q[int(rng.integers(2))], min_input),
        max(width_q[int(rng.integers(2))], min_input),
    )
    return MinibatchPlan(height_q, width_q, target)


def fit_axis(pixels: np.ndarray, axis: int, size: int, rng: np.random.Generator,
             fill: float = FILL_VALUE) -> np.ndarray:
    """Crop or pad one axis to ``size`` at a uniform random offset."""
    current = pixels.shape[axis]
    if current == size:
        return pixels
    offset = int(rng.integers(0, abs(current - size) + 1))
    if current > size:
        return np.take(pixels, np.arange(offset, offset + size), axis=axis)
    widths = [(0, 0), (0, 0)]
    widths[axis] = (offset, size - current - offset)
    return np.pad(pixels, widths, constant_values=fill)


def make_minibatch(slices: Sequence[LabeledSlice], rng: np.random.Generator,
                   min_input: int = 224) -> Tuple[np.ndarray, np.ndarray, MinibatchPlan]:
    """Stack slices into ``(B, 1, H, W)`` at one planned size, with ``(B, N)`` labels.

    Slices are expected resampled and normalized; padding uses the normalized
    air value.
    """
    if not slices:
        raise ValueError("cannot build an empty minibatch")
    plan = plan_minibatch([s.slice.shape for s in slices], rng, min_input)
    height, width = plan.target

    batch = np.empty((len(slices), 1, height, width), dtype=np.float32)
    for i, item in enumerate(slices):
        pixels = fit_axis(item.slice.pixels, 0, height, rng)
        batch[i, 0] = fit_axis(pixels, 1, width, rng)
    labels = np.stack([item.label.as_array() for item in slices])
    return batch, labels, plan
