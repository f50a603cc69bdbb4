"""3D volumes in a MetaImage subset (text ``.mhd`` header plus raw payload)."""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Tuple

import numpy as np

from bobnet.utils.errors import VolumeFormatError
from bobnet.utils.logging import get_logger

ELEMENT_TYPES: Dict[str, str] = {
    "MET_SHORT": "<i2",
    "MET_FLOAT": "<f4",
}
REQUIRED_KEYS = ("ObjectType", "NDims", "DimSize", "ElementSpacing", "ElementType", "ElementDataFile")

logger = get_logger()


@dataclass
class Volume3D:
    """Axis-aligned scalar volume indexed ``voxels[x, y, z]``."""
    voxels: np.ndarray
    spacing_mm: Tuple[float, float, float]

    def __post_init__(self) -> None:
        if self.voxels.ndim != 3:
            raise ValueError(f"volume must be 3D, got shape {self.voxels.shape}")
        if min(self.voxels.shape) < 1:
            raise ValueError(f"volume extents must be positive, got {self.voxels.shape}")
        if len(self.spacing_mm) != 3 or min(self.spacing_mm) <= 0:
            raise ValueError(f"spacing must be three positive values, got {self.spacing_mm}")
        self.spacing_mm = tuple(float(s) for s in self.spacing_mm)  # type: ignore[assignment]

    @property
    def dims(self) -> Tuple[int, int, int]:
        return self.voxels.shape  # type: ignore[return-value]


@dataclass
class VolumeHeader:
    """Parsed header fields."""
    dims: Tuple[int, int, int]
    spacing_mm: Tuple[float, float, float]
    element_type: str
    data_file: Path

    @property
    def voxel_count(self) -> int:
        return int(np.prod(self.dims))

    @property
    def byte_count(self) -> int:
        return self.voxel_count * np.dtype(ELEMENT_TYPES[self.element_type]).itemsize


def _parse_header_lines(text: str) -> Dict[str, str]:
    entries: Dict[str, str] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise VolumeFormatError(line.split()[0], "expected 'Key = Value'")
        entries[key.strip()] = value.strip()
    return entries


def _parse_numbers(key: str, value: str, kind: type, count: int = 3) -> Tuple:
    try:
        numbers = tuple(kind(token) for token in value.split())
    except ValueError as e:
        raise VolumeFormatError(key, f"not a list of numbers: {value!r}") from e
    if len(numbers) != count:
        raise VolumeFormatError(key, f"expected {count} values, got {len(numbers)}")
    if min(numbers) <= 0:
        raise VolumeFormatError(key, f"values must be positive, got {value!r}")
    return numbers


def read_volume_header(header_path: Path) -> VolumeHeader:
    """Parse and check an ``.mhd`` header without touching the raw file."""
    header_path = Path(header_path)
    entries = _parse_header_lines(header_path.read_text(encoding="utf-8"))

    for key in REQUIRED_KEYS:
        if key not in entries:
            raise VolumeFormatError(key, "missing required key")
    if entries["ObjectType"] != "Image":
        raise VolumeFormatError("ObjectType", f"expected Image, got {entries['ObjectType']!r}")
    if entries["NDims"] != "3":
        raise VolumeFormatError("NDims", f"expected 3, got {entries['NDims']!r}")
    for key in ("BinaryDataByteOrderMSB", "ElementByteOrderMSB"):
        if entries.get(key, "False") != "False":
            raise VolumeFormatError(key, "only little-endian payloads are supported")
    if entries.get("CompressedData", "False") != "False":
        raise VolumeFormatError("CompressedData", "compressed payloads are not supported")
    if entries["ElementType"] not in ELEMENT_TYPES:
        raise VolumeFormatError(
            "ElementType", f"expected one of {', '.join(ELEMENT_TYPES)}, got {entries['ElementType']!r}"
        )

    return VolumeHeader(
        dims=_parse_numbers("DimSize", entries["DimSize"], int),
        spacing_mm=_parse_numbers("ElementSpacing", entries["ElementSpacing"], float),
        element_type=entries["ElementType"],
        data_file=header_path.parent / entries["ElementDataFile"],
    )


def load_volume(header_path: Path) -> Volume3D:
    """Read a volume; voxels are widened to float32 in ``[x, y, z]`` order.

    Raises:
        VolumeFormatError: missing or invalid header key, or a raw payload
            whose size disagrees with ``DimSize``.
    """
    header = read_volume_header(header_path)
    if not header.data_file.exists():
        raise VolumeFormatError("ElementDataFile", f"raw file not found: {header.data_file}")
    payload = header.data_file.read_bytes()
    if len(payload) != header.byte_count:
        raise VolumeFormatError(
            "DimSize",
            f"header expects {header.byte_count} bytes, {header.data_file.name} has {len(payload)}",
        )
    flat = np.frombuffer(payload, dtype=ELEMENT_TYPES[header.element_type])
    # x varies fastest on disk
    voxels = flat.reshape(header.dims, order="F").astype(np.float32)
    logger.debug(f"Loaded volume {header_path} dims={header.dims} spacing={header.spacing_mm}")
    return Volume3D(voxels=voxels, spacing_mm=header.spacing_mm)


def write_volume(volume: Volume3D, header_path: Path) -> Tuple[Path, Path]:
    """Write ``<name>.mhd`` and ``<name>.raw`` with MET_FLOAT payload."""
    header_path = Path(header_path)
    header_path.parent.mkdir(parents=True, exist_ok=True)
    raw_path = header_path.with_suffix(".raw")

    header = "\n".join([
        "ObjectType = Image",
        "NDims = 3",
        "BinaryData = True",
        "BinaryDataByteOrderMSB = False",
        "DimSize = " + " ".join(str(d) for d in volume.dims),
        "ElementSpacing = " + " ".join(repr(s) for s in volume.spacing_mm),
        "ElementType = MET_FLOAT",
        f"ElementDataFile = {raw_path.name}",
    ]) + "\n"

    raw_path.write_bytes(np.asarray(volume.voxels, dtype="<f4").tobytes(order="F"))
    header_path.write_text(header, encoding="utf-8")
    return header_path, raw_path
