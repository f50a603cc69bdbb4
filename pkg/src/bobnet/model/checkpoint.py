"""BOBN checkpoint format.

Layout, all integers 32-bit little-endian unsigned::

    b"BOBN" | version | N | scale numerator | scale denominator | layer count
    per parameterized layer, weights then biases:
        rank | extent * rank | float32 LE payload

Structure names live in a text sidecar ``<checkpoint>.names`` and the in-plane
spacing the model was trained at in ``<checkpoint>.spacing``.
"""

import struct
from fractions import Fraction
from pathlib import Path
from typing import BinaryIO, List, Optional, Sequence, Tuple

import numpy as np

from bobnet.model.bobnet import BoBNet, bobnet_spec
from bobnet.utils.errors import CheckpointFormatError
from bobnet.utils.logging import get_logger

MAGIC = b"BOBN"
FORMAT_VERSION = 1
_U32 = struct.Struct("<I")

logger = get_logger()


def names_path(path: Path) -> Path:
    return path.with_name(path.name + ".names")


def spacing_path(path: Path) -> Path:
    return path.with_name(path.name + ".spacing")


def encode_checkpoint(model: BoBNet) -> bytes:
    """Serialize model architecture and parameters."""
    scale = model.spec.channel_scale
    parts = [
        MAGIC,
        struct.pack("<5I", FORMAT_VERSION, model.num_structures,
                    scale.numerator, scale.denominator, len(model.parameters.weights)),
    ]
    for tensor in model.parameters.tensors():
        parts.append(_U32.pack(tensor.ndim))
        parts.append(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
        parts.append(np.ascontiguousarray(tensor, dtype="<f4").tobytes())
    return b"".join(parts)


def _read_exact(stream: BinaryIO, size: int, what: str) -> bytes:
    data = stream.read(size)
    if len(data) != size:
        raise CheckpointFormatError(f"truncated checkpoint while reading {what}")
    return data


def _read_u32(stream: BinaryIO, what: str) -> int:
    return _U32.unpack(_read_exact(stream, 4, what))[0]


def decode_checkpoint(stream: BinaryIO) -> BoBNet:
    """Rebuild a float32 model from a checkpoint stream."""
    if _read_exact(stream, 4, "magic") != MAGIC:
        raise CheckpointFormatError("not a BOBN checkpoint (bad magic bytes)")
    version = _read_u32(stream, "version")
    if version != FORMAT_VERSION:
        raise CheckpointFormatError(f"unsupported checkpoint version {version}")
    num_structures = _read_u32(stream, "structure count")
    numerator = _read_u32(stream, "scale numerator")
    denominator = _read_u32(stream, "scale denominator")
    layer_count = _read_u32(stream, "layer count")
    if num_structures < 1 or numerator < 1 or denominator < 1:
        raise CheckpointFormatError("structure count and channel scale must be positive")

    try:
        spec = bobnet_spec(num_structures, Fraction(numerator, denominator))
    except ValueError as e:
        raise CheckpointFormatError(str(e)) from e
    if layer_count != len(spec.parameterized):
        raise CheckpointFormatError(
            f"layer count {layer_count} does not match architecture ({len(spec.parameterized)})"
        )

    model = BoBNet(spec, np.random.default_rng(0), np.float32)
    tensors: List[np.ndarray] = []
    for index, expected in enumerate(model.parameters.tensors()):
        rank = _read_u32(stream, f"rank of tensor {index}")
        shape = struct.unpack(f"<{rank}I", _read_exact(stream, 4 * rank, f"shape of tensor {index}"))
        if shape != expected.shape:
            raise CheckpointFormatError(f"tensor {index}: expected shape {expected.shape}, got {shape}")
        count = int(np.prod(shape))
        payload = _read_exact(stream, 4 * count, f"payload of tensor {index}")
        tensors.append(np.frombuffer(payload, dtype="<f4").reshape(shape))
    if stream.read(1):
        raise CheckpointFormatError("trailing bytes after the last tensor")

    model.load_tensors(tensors)
    return model


def save_checkpoint(model: BoBNet, path: Path,
                    structure_names: Optional[Sequence[str]] = None,
                    target_spacing_mm: Optional[float] = None) -> None:
    """Write the checkpoint plus the ``.names`` and ``.spacing`` sidecars that apply."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(model))
    if structure_names is not None:
        if len(structure_names) != model.num_structures:
            raise ValueError(
                f"{len(structure_names)} names given for {model.num_structures} structures"
            )
        names_path(path).write_text("".join(f"{name}\n" for name in structure_names), encoding="utf-8")
    if target_spacing_mm is not None:
        if target_spacing_mm <= 0:
            raise ValueError(f"target spacing must be positive, got {target_spacing_mm}")
        spacing_path(path).write_text(f"{float(target_spacing_mm)!r}\n", encoding="utf-8")
    logger.debug(f"Checkpoint written: {path}")


def load_checkpoint(path: Path) -> Tuple[BoBNet, List[str]]:
    """Load a model and its structure names (``structure_<n>`` without a sidecar)."""
    path = Path(path)
    with open(path, "rb") as f:
        model = decode_checkpoint(f)

    sidecar = names_path(path)
    if sidecar.exists():
        names = [line.strip() for line in sidecar.read_text(encoding="utf-8").splitlines() if line.strip()]
        if len(names) != model.num_structures:
            raise CheckpointFormatError(
                f"{sidecar} lists {len(names)} names for {model.num_structures} structures"
            )
    else:
        names = [f"structure_{n}" for n in range(model.num_structures)]
    return model, names


def load_training_spacing(path: Path) -> Optional[float]:
    """In-plane spacing (mm) the checkpoint was trained at, or None without a sidecar."""
    sidecar = spacing_path(Path(path))
    if not sidecar.exists():
        return None
    text = sidecar.read_text(encoding="utf-8").strip()
    try:
        spacing = float(text)
    except ValueError as e:
        raise CheckpointFormatError(f"{sidecar}: expected a spacing in mm, got {text!r}") from e
    if not spacing > 0:
        raise CheckpointFormatError(f"{sidecar}: spacing must be positive, got {spacing}")
    return spacing
