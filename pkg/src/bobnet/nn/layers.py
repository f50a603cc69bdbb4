"""Network layers with cached forward passes and analytic backward passes.

``forward(x, training, store)`` keeps what ``backward`` needs only when
``store`` is true. Inference calls pass ``store=False`` and leave the layer
untouched, so one model can serve several threads.
"""

from abc import ABC, abstractmethod
from typing import Any, List, Optional, Sequence

import numpy as np

from bobnet.nn import functional as F
from bobnet.nn.init import glorot_uniform_init
from bobnet.utils.errors import InvalidStateError


class Layer(ABC):
    """Abstract base class for layers."""

    kind: str = "layer"

    def __init__(self) -> None:
        self._cache: Any = None

    @abstractmethod
    def forward(self, x: np.ndarray, training: bool = False, store: bool = True) -> np.ndarray:
        """Compute the layer output for a batch."""

    @abstractmethod
    def backward(self, grad: np.ndarray) -> np.ndarray:
        """Propagate the output gradient; parameterized layers fill ``grads``."""

    def _cached(self) -> Any:
        if self._cache is None:
            raise InvalidStateError(f"{self.kind}: backward called before forward")
        return self._cache

    def clear(self) -> None:
        self._cache = None

    @property
    def params(self) -> List[np.ndarray]:
        return []


class ParamLayer(Layer):
    """Layer owning a (weights, biases) pair."""

    def __init__(self, weights: np.ndarray, biases: np.ndarray):
        super().__init__()
        self.weights = weights
        self.biases = biases
        self.grad_weights: Optional[np.ndarray] = None
        self.grad_biases: Optional[np.ndarray] = None

    @property
    def params(self) -> List[np.ndarray]:
        return [self.weights, self.biases]


class Conv3x3(ParamLayer):
    kind = "conv3x3"

    def __init__(self, in_channels: int, out_channels: int, rng: np.random.Generator,
                 dtype: type = np.float32):
        super().__init__(
            glorot_uniform_init((out_channels, in_channels, 3, 3), rng, dtype),
            np.zeros(out_channels, dtype=dtype),
        )

    def forward(self, x: np.ndarray, training: bool = False, store: bool = True) -> np.ndarray:
        out = F.conv3x3_forward(x, self.weights, self.biases)
        if store:
            self._cache = x
        return out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        x = self._cached()
        out_channels = self.weights.shape[0]
        cols = F.im2col3x3(np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1))))
        grad_flat = grad.transpose(0, 2, 3, 1).reshape(-1, out_channels)
        self.grad_weights = (grad_flat.T @ cols).reshape(self.weights.shape)
        self.grad_biases = grad.sum(axis=(0, 2, 3))
        # input gradient: correlate the output gradient with flipped, transposed kernels
        flipped = self.weights[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
        return F.correlate3x3(grad, np.ascontiguousarray(flipped))


class ReLU(Layer):
    kind = "relu"

    def forward(self, x: np.ndarray, training: bool = False, store: bool = True) -> np.ndarray:
        if store:
            self._cache = x > 0
        return F.relu_forward(x)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return grad * self._cached()


class MaxPool2x2(Layer):
    kind = "maxpool2x2"

    def forward(self, x: np.ndarray, training: bool = False, store: bool = True) -> np.ndarray:
        out = F.maxpool2x2_forward(x)
        if store:
            b, c, h, w = x.shape
            h2, w2 = h // 2, w // 2
            windows = x[:, :, :2 * h2, :2 * w2].reshape(b, c, h2, 2, w2, 2)
            windows = windows.transpose(0, 1, 2, 4, 3, 5).reshape(b, c, h2, w2, 4)
            # one winner per window, first in raster order on ties
            self._cache = (windows.argmax(axis=-1), x.shape)
        return out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        winners, shape = self._cached()
        b, c, h, w = shape
        h2, w2 = h // 2, w // 2
        routed = np.zeros((b, c, h2, w2, 4), dtype=grad.dtype)
        np.put_along_axis(routed, winners[..., np.newaxis], grad[..., np.newaxis], axis=-1)
        routed = routed.reshape(b, c, h2, w2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
        dx = np.zeros(shape, dtype=grad.dtype)
        dx[:, :, :2 * h2, :2 * w2] = routed.reshape(b, c, 2 * h2, 2 * w2)
        return dx


class SpatialPyramidPool(Layer):
    kind = "spp"

    def __init__(self, levels: Sequence[int] = F.SPP_LEVELS):
        super().__init__()
        self.levels = tuple(levels)

    def forward(self, x: np.ndarray, training: bool = False, store: bool = True) -> np.ndarray:
        out = F.spp_forward(x, self.levels)
        if store:
            self._cache = x
        return out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        x = self._cached()
        b, c, h, w = x.shape
        bins = [
            (rows, cols)
            for grid in self.levels
            for rows in F.spp_bins(h, grid)
            for cols in F.spp_bins(w, grid)
        ]
        grad = grad.reshape(b, c, len(bins))
        dx = np.zeros_like(x, dtype=grad.dtype)
        batch_idx, chan_idx = np.meshgrid(np.arange(b), np.arange(c), indexing="ij")
        for k, ((r0, r1), (c0, c1)) in enumerate(bins):
            region = x[:, :, r0:r1, c0:c1].reshape(b, c, -1)
            rr, cc = np.unravel_index(region.argmax(axis=-1), (r1 - r0, c1 - c0))
            # (batch, channel) pairs are unique within one bin, so += does not collide
            dx[batch_idx, chan_idx, r0 + rr, c0 + cc] += grad[:, :, k]
        return dx


class FullyConnected(ParamLayer):
    kind = "fully-connected"

    def __init__(self, in_units: int, out_units: int, rng: np.random.Generator,
                 dtype: type = np.float32):
        super().__init__(
            glorot_uniform_init((out_units, in_units), rng, dtype),
            np.zeros(out_units, dtype=dtype),
        )

    def forward(self, x: np.ndarray, training: bool = False, store: bool = True) -> np.ndarray:
        if x.shape[-1] != self.weights.shape[1]:
            raise ValueError(f"expected {self.weights.shape[1]} input units, got {x.shape[-1]}")
        if store:
            self._cache = x
        return x @ self.weights.T + self.biases

    def backward(self, grad: np.ndarray) -> np.ndarray:
        x = self._cached()
        self.grad_weights = grad.T @ x
        self.grad_biases = grad.sum(axis=0)
        return grad @ self.weights


class Dropout(Layer):
    kind = "dropout"

    def __init__(self, rate: float, rng: np.random.Generator):
        super().__init__()
        if not 0 <= rate < 1:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self.rng = rng

    def forward(self, x: np.ndarray, training: bool = False, store: bool = True) -> np.ndarray:
        out, mask = F.dropout_with_mask(x, self.rate, self.rng, training)
        if store:
            self._cache = (mask,)
        return out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        (mask,) = self._cached()
        return grad if mask is None else grad * mask


class PairedSoftmax(Layer):
    """Output layer normalizing each (presence, absence) pair."""

    kind = "paired-softmax"

    def forward(self, x: np.ndarray, training: bool = False, store: bool = True) -> np.ndarray:
        out = F.paired_softmax(x)
        if store:
            self._cache = out
        return out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        probs = self._cached()
        pairs_p = probs.reshape(probs.shape[0], -1, 2)
        pairs_g = grad.reshape(pairs_p.shape)
        inner = (pairs_p * pairs_g).sum(axis=-1, keepdims=True)
        return (pairs_p * (pairs_g - inner)).reshape(probs.shape)

    def cross_entropy_backward(self, targets: np.ndarray) -> np.ndarray:
        """Gradient of the batch-mean cross-entropy w.r.t. the logits."""
        probs = self._cached()
        return (probs - targets.astype(probs.dtype)) / probs.dtype.type(probs.shape[0])
