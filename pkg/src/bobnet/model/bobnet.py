"""BoBNet: the bounding-box network.

Eight 3x3 convolutions (16, 32, 64, 64, 128, 128, 128, 128 kernels, times the
channel scale) with ReLU, 2x2 max pooling after convolutions 1, 2, 4 and 6,
spatial pyramid pooling after convolution 8, two fully connected layers with
ReLU and dropout, and an output layer of 2N units normalized pairwise.
"""

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from bobnet.nn import functional as F
from bobnet.nn.layers import (
    Conv3x3,
    Dropout,
    FullyConnected,
    Layer,
    MaxPool2x2,
    PairedSoftmax,
    ParamLayer,
    ReLU,
    SpatialPyramidPool,
)

CONV_WIDTHS: Tuple[int, ...] = (16, 32, 64, 64, 128, 128, 128, 128)
POOL_AFTER: Tuple[int, ...] = (1, 2, 4, 6)
FC_UNITS = 128
FC_LAYERS = 2
MIN_SLICE_SIZE = 64

Scale = Union[int, float, str, Fraction]
GradientList = List[Tuple[np.ndarray, np.ndarray]]


class LayerKind(str, Enum):
    CONV3X3 = "conv3x3"
    RELU = "relu"
    MAXPOOL2X2 = "maxpool2x2"
    SPP = "spp"
    FULLY_CONNECTED = "fully-connected"
    DROPOUT = "dropout"
    PAIRED_SOFTMAX = "paired-softmax"


@dataclass(frozen=True)
class LayerSpec:
    """One entry of the layer sequence."""
    kind: LayerKind
    in_channels: Optional[int] = None
    out_channels: Optional[int] = None
    in_units: Optional[int] = None
    out_units: Optional[int] = None
    rate: Optional[float] = None
    pyramid_levels: Optional[Tuple[int, ...]] = None


@dataclass
class ModelSpec:
    """Declarative architecture for N target structures."""
    num_structures: int
    channel_scale: Fraction
    layers: List[LayerSpec] = field(default_factory=list)

    @property
    def conv_widths(self) -> List[int]:
        return [s.out_channels for s in self.layers if s.kind is LayerKind.CONV3X3]  # type: ignore[misc]

    @property
    def output_units(self) -> int:
        return 2 * self.num_structures

    @property
    def parameterized(self) -> List[LayerSpec]:
        return [s for s in self.layers if s.kind in (LayerKind.CONV3X3, LayerKind.FULLY_CONNECTED)]


def as_fraction(scale: Scale) -> Fraction:
    value = scale if isinstance(scale, Fraction) else Fraction(str(scale))
    if value <= 0:
        raise ValueError(f"channel_scale must be positive, got {scale}")
    return value


def scaled_width(width: int, scale: Fraction) -> int:
    value = width * scale
    if value.denominator != 1 or value < 1:
        raise ValueError(f"channel_scale {scale} does not give a whole width for {width}")
    return int(value)


def bobnet_spec(num_structures: int, channel_scale: Scale = 1,
                dropout_rate: float = 0.5) -> ModelSpec:
    """Layer sequence for ``num_structures`` targets at the given width scale."""
    if num_structures < 1:
        raise ValueError(f"number of structures must be at least 1, got {num_structures}")
    scale = as_fraction(channel_scale)

    layers: List[LayerSpec] = []
    in_channels = 1
    for position, width in enumerate(CONV_WIDTHS, 1):
        out_channels = scaled_width(width, scale)
        layers.append(LayerSpec(LayerKind.CONV3X3, in_channels=in_channels, out_channels=out_channels))
        layers.append(LayerSpec(LayerKind.RELU))
        if position in POOL_AFTER:
            layers.append(LayerSpec(LayerKind.MAXPOOL2X2))
        in_channels = out_channels
    layers.append(LayerSpec(LayerKind.SPP, pyramid_levels=F.SPP_LEVELS))

    in_units = F.SPP_BINS * in_channels
    fc_units = scaled_width(FC_UNITS, scale)
    for _ in range(FC_LAYERS):
        layers.append(LayerSpec(LayerKind.FULLY_CONNECTED, in_units=in_units, out_units=fc_units))
        layers.append(LayerSpec(LayerKind.RELU))
        layers.append(LayerSpec(LayerKind.DROPOUT, rate=dropout_rate))
        in_units = fc_units
    layers.append(LayerSpec(LayerKind.FULLY_CONNECTED, in_units=in_units,
                            out_units=2 * num_structures))
    layers.append(LayerSpec(LayerKind.PAIRED_SOFTMAX))
    return ModelSpec(num_structures=num_structures, channel_scale=scale, layers=layers)


@dataclass
class ParameterSet:
    """Weights and biases per parameterized layer with matching velocity buffers."""
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    weight_velocities: List[np.ndarray] = field(default_factory=list)
    bias_velocities: List[np.ndarray] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.weight_velocities:
            self.weight_velocities = [np.zeros_like(w) for w in self.weights]
        if not self.bias_velocities:
            self.bias_velocities = [np.zeros_like(b) for b in self.biases]

    def tensors(self) -> List[np.ndarray]:
        """Flat list ``[w0, b0, w1, b1, ...]``."""
        return [t for pair in zip(self.weights, self.biases) for t in pair]

    def velocities(self) -> List[np.ndarray]:
        return [t for pair in zip(self.weight_velocities, self.bias_velocities) for t in pair]

    def count(self) -> int:
        return sum(t.size for t in self.tensors())


def _make_layer(spec: LayerSpec, rng: np.random.Generator, dtype: type) -> Layer:
    if spec.kind is LayerKind.CONV3X3:
        return Conv3x3(spec.in_channels, spec.out_channels, rng, dtype)  # type: ignore[arg-type]
    if spec.kind is LayerKind.RELU:
        return ReLU()
    if spec.kind is LayerKind.MAXPOOL2X2:
        return MaxPool2x2()
    if spec.kind is LayerKind.SPP:
        return SpatialPyramidPool(spec.pyramid_levels or F.SPP_LEVELS)
    if spec.kind is LayerKind.FULLY_CONNECTED:
        return FullyConnected(spec.in_units, spec.out_units, rng, dtype)  # type: ignore[arg-type]
    if spec.kind is LayerKind.DROPOUT:
        return Dropout(spec.rate or 0.0, rng)
    return PairedSoftmax()


class BoBNet:
    """BoBNet model: layer objects, their parameters and the training hooks."""

    def __init__(self, spec: ModelSpec, rng: np.random.Generator, dtype: type = np.float32):
        self.spec = spec
        self.dtype = np.dtype(dtype).type
        self.layers: List[Layer] = [_make_layer(s, rng, self.dtype) for s in spec.layers]
        self._param_layers = [layer for layer in self.layers if isinstance(layer, ParamLayer)]
        self.parameters = ParameterSet(
            weights=[layer.weights for layer in self._param_layers],
            biases=[layer.biases for layer in self._param_layers],
        )

    @property
    def num_structures(self) -> int:
        return self.spec.num_structures

    def parameter_count(self) -> int:
        return self.parameters.count()

    def feature_shape(self, height: int, width: int) -> Tuple[int, int, int]:
        """Shape of the feature map entering spatial pyramid pooling."""
        for _ in POOL_AFTER:
            height, width = height // 2, width // 2
        return self.spec.conv_widths[-1], height, width

    def load_tensors(self, tensors: Sequence[np.ndarray]) -> None:
        """Copy ``[w0, b0, w1, b1, ...]`` into the model, checking shapes."""
        current = self.parameters.tensors()
        if len(tensors) != len(current):
            raise ValueError(f"expected {len(current)} tensors, got {len(tensors)}")
        for index, (target, source) in enumerate(zip(current, tensors)):
            if target.shape != tuple(source.shape):
                raise ValueError(f"tensor {index}: expected shape {target.shape}, got {source.shape}")
            target[...] = source
        for velocity in self.parameters.velocities():
            velocity[...] = 0

    def forward(self, batch: np.ndarray, training: bool = False, store: bool = True) -> np.ndarray:
        """Paired-softmax outputs ``(B, 2N)`` for a batch ``(B, 1, H, W)``."""
        x = np.asarray(batch, dtype=self.dtype)
        if x.ndim != 4 or x.shape[1] != 1:
            raise ValueError(f"batch must have shape (B, 1, H, W), got {x.shape}")
        for layer in self.layers:
            x = layer.forward(x, training=training, store=store)
        return x

    def l2_penalty(self) -> float:
        return float(sum(np.sum(np.square(w, dtype=np.float64)) for w in self.parameters.weights))

    def loss(self, probs: np.ndarray, labels: np.ndarray, l2_weight: float = 0.0) -> float:
        """Batch-mean paired cross-entropy plus ``l2_weight * sum(w^2)`` over weights."""
        labels = np.asarray(labels, dtype=bool)
        picked = np.where(labels, probs[:, 0::2], probs[:, 1::2]).astype(np.float64)
        data_loss = float(-np.log(np.maximum(picked, F.LOG_CLAMP)).sum(axis=1).mean())
        return data_loss + l2_weight * self.l2_penalty()

    def backward(self, labels: np.ndarray, l2_weight: float = 0.0) -> GradientList:
        """Analytic gradients of :meth:`loss` for the last stored forward pass.

        Raises:
            InvalidStateError: when no forward pass has been stored.
        """
        output = self.layers[-1]
        assert isinstance(output, PairedSoftmax)
        targets = F.pair_targets(np.asarray(labels, dtype=bool))
        grad = output.cross_entropy_backward(targets)
        for layer in reversed(self.layers[:-1]):
            grad = layer.backward(grad)

        gradients: GradientList = []
        for layer in self._param_layers:
            assert layer.grad_weights is not None and layer.grad_biases is not None
            grad_w = layer.grad_weights
            if l2_weight:
                grad_w = grad_w + (2 * l2_weight) * layer.weights
            gradients.append((grad_w, layer.grad_biases))
        return gradients

    def clear(self) -> None:
        """Drop cached activations."""
        for layer in self.layers:
            layer.clear()

    def predict_batch(self, batch: np.ndarray) -> np.ndarray:
        """Presence probabilities ``(B, N)``; inference mode, nothing cached."""
        probs = self.forward(batch, training=False, store=False)
        return probs[:, 0::2]

    def predict_slice(self, slice_image: np.ndarray) -> np.ndarray:
        """Presence probability per structure for one ``(1, H, W)`` or ``(H, W)`` slice.

        Raises:
            ValueError: when the slice is smaller than 64x64.
        """
        image = np.asarray(slice_image)
        if image.ndim == 2:
            image = image[np.newaxis]
        if image.ndim != 3 or image.shape[0] != 1:
            raise ValueError(f"slice must have shape (1, H, W), got {image.shape}")
        if image.shape[1] < MIN_SLICE_SIZE or image.shape[2] < MIN_SLICE_SIZE:
            raise ValueError(
                f"slice of {image.shape[1]}x{image.shape[2]} is smaller than "
                f"{MIN_SLICE_SIZE}x{MIN_SLICE_SIZE}; pad it first"
            )
        return self.predict_batch(image[np.newaxis])[0]


def build_bobnet(num_structures: int, channel_scale: Scale = 1,
                 rng: Optional[np.random.Generator] = None, dtype: type = np.float32,
                 dropout_rate: float = 0.5) -> BoBNet:
    """Glorot-initialized BoBNet; ``model.spec`` and ``model.parameters`` hold the pair."""
    spec = bobnet_spec(num_structures, channel_scale, dropout_rate)
    return BoBNet(spec, rng if rng is not None else np.random.default_rng(0), dtype)


def loss_and_gradients(model: BoBNet, batch: np.ndarray, labels: np.ndarray,
                       l2_weight: float = 0.0, training: bool = True) -> Tuple[float, GradientList]:
    """Forward, loss and backward in one call."""
    probs = model.forward(batch, training=training, store=True)
    loss = model.loss(probs, labels, l2_weight)
    return loss, model.backward(labels, l2_weight)
