"""Weight initialization."""

from typing import Sequence, Tuple

import numpy as np


def fan_in_out(shape: Sequence[int]) -> Tuple[int, int]:
    """Fan counts for a dense ``(out, in)`` or convolution ``(out, in, kh, kw)`` shape."""
    shape = tuple(int(s) for s in shape)
    if len(shape) == 2:
        return shape[1], shape[0]
    if len(shape) == 4:
        receptive = shape[2] * shape[3]
        return shape[1] * receptive, shape[0] * receptive
    raise ValueError(f"cannot derive fan_in/fan_out from shape {shape}")


def glorot_bound(fan_in: int, fan_out: int) -> float:
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def glorot_uniform_init(shape: Sequence[int], rng: np.random.Generator,
                        dtype: type = np.float32) -> np.ndarray:
    """Sample i.i.d. from U[-b, b] with b = sqrt(6 / (fan_in + fan_out))."""
    bound = glorot_bound(*fan_in_out(shape))
    return rng.uniform(-bound, bound, size=tuple(shape)).astype(dtype)
