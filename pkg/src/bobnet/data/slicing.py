"""Slice extraction, resampling, normalization, labeling and augmentation."""

from dataclasses import dataclass, replace
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from bobnet.imaging.boxes import BBox3D
from bobnet.imaging.volume import Volume3D

HU_RANGE = 1000.0
FILL_VALUE = -1.0
MIN_SLICE_SIZE = 64


class Plane(str, Enum):
    """Viewing plane, named after its normal axis."""
    SAGITTAL = "sagittal"
    CORONAL = "coronal"
    AXIAL = "axial"

    @property
    def axis(self) -> int:
        return {"sagittal": 0, "coronal": 1, "axial": 2}[self.value]

    @property
    def in_plane_axes(self) -> Tuple[int, int]:
        return tuple(a for a in range(3) if a != self.axis)  # type: ignore[return-value]


PLANES: Tuple[Plane, ...] = (Plane.SAGITTAL, Plane.CORONAL, Plane.AXIAL)


@dataclass
class Slice2D:
    """One plane of a volume with in-plane ``(row, col)`` spacing."""
    plane: Plane
    index: int
    pixels: np.ndarray
    pixel_spacing_mm: Tuple[float, float]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.pixels.shape  # type: ignore[return-value]


@dataclass(frozen=True)
class SliceLabel:
    presence: Tuple[bool, ...]

    def as_array(self) -> np.ndarray:
        return np.array(self.presence, dtype=bool)


@dataclass
class LabeledSlice:
    slice: Slice2D
    label: SliceLabel


def extract_slices(volume: Volume3D, plane: Plane) -> List[Slice2D]:
    """All slices along the plane normal, in index order.

    Axial slice k holds ``voxels[:, :, k]``, coronal j ``voxels[:, j, :]`` and
    sagittal i ``voxels[i, :, :]``.
    """
    plane = Plane(plane)
    row_axis, col_axis = plane.in_plane_axes
    spacing = (volume.spacing_mm[row_axis], volume.spacing_mm[col_axis])
    return [
        Slice2D(plane, index, np.take(volume.voxels, index, axis=plane.axis), spacing)
        for index in range(volume.dims[plane.axis])
    ]


def resampled_extent(extent: int, spacing_mm: float, target_mm: float) -> int:
    # round half up
    return int(np.floor(extent * spacing_mm / target_mm + 0.5))


def resample_slice(slice_2d: Slice2D, target_mm: float) -> Slice2D:
    """Bilinear resampling to isotropic ``target_mm`` pixels.

    Raises:
        ValueError: target_mm is not positive or a resulting extent is below 1.
    """
    if target_mm <= 0:
        raise ValueError(f"target spacing must be positive, got {target_mm}")
    old_shape = slice_2d.pixels.shape
    new_shape = tuple(
        resampled_extent(n, s, target_mm) for n, s in zip(old_shape, slice_2d.pixel_spacing_mm)
    )
    if min(new_shape) < 1:
        raise ValueError(f"resampling {old_shape} to {target_mm} mm gives extent {new_shape}")

    if new_shape == old_shape:
        pixels = slice_2d.pixels.astype(np.float32, copy=True)
    else:
        # pixel centers of the new grid mapped onto the old one
        rows, cols = (
            (np.arange(new, dtype=np.float64) + 0.5) * old / new - 0.5
            for old, new in zip(old_shape, new_shape)
        )
        grid = np.meshgrid(rows, cols, indexing="ij")
        pixels = ndimage.map_coordinates(
            slice_2d.pixels.astype(np.float64), grid, order=1, mode="nearest"
        ).astype(np.float32)
    return replace(slice_2d, pixels=pixels, pixel_spacing_mm=(float(target_mm), float(target_mm)))


def normalize_intensity(slice_2d: Slice2D) -> Slice2D:
    """Clamp to [-1000, 1000] and map affinely to [-1, 1]."""
    pixels = np.clip(slice_2d.pixels, -HU_RANGE, HU_RANGE) / np.float32(HU_RANGE)
    return replace(slice_2d, pixels=pixels.astype(np.float32))


def label_slice(slice_2d: Slice2D, boxes: Sequence[BBox3D]) -> SliceLabel:
    """Structure n is present when the slice index lies in box n along the normal (inclusive)."""
    axis = slice_2d.plane.axis
    return SliceLabel(tuple(box.lo[axis] <= slice_2d.index <= box.hi[axis] for box in boxes))


def rotate_augment(slice_2d: Slice2D, rng: np.random.Generator, max_degrees: float = 10.0,
                   angle: Optional[float] = None) -> Slice2D:
    """Rotate about the slice center by a uniform angle in ``[-max, +max]`` degrees.

    Bilinear, same extent, out-of-frame pixels set to -1.
    """
    if angle is None:
        angle = float(rng.uniform(-max_degrees, max_degrees)) if max_degrees > 0 else 0.0
    if angle == 0:
        return replace(slice_2d, pixels=slice_2d.pixels.copy())
    pixels = ndimage.rotate(
        slice_2d.pixels, angle, reshape=False, order=1, mode="constant", cval=FILL_VALUE
    )
    return replace(slice_2d, pixels=pixels.astype(np.float32))


def pad_to_minimum(pixels: np.ndarray, min_size: int = MIN_SLICE_SIZE,
                   fill: float = FILL_VALUE) -> np.ndarray:
    """Center a 2D image on a canvas of at least ``min_size`` per side."""
    height, width = pixels.shape
    pad_h, pad_w = max(min_size - height, 0), max(min_size - width, 0)
    if not pad_h and not pad_w:
        return pixels
    return np.pad(
        pixels,
        ((pad_h // 2, pad_h - pad_h // 2), (pad_w // 2, pad_w - pad_w // 2)),
        constant_values=fill,
    )


def prepare_slice(slice_2d: Slice2D, target_mm: float) -> Slice2D:
    return normalize_intensity(resample_slice(slice_2d, target_mm))


def prepare_volume_slices(volume: Volume3D, boxes: Sequence[BBox3D],
                          target_mm: float) -> List[LabeledSlice]:
    """Resampled, normalized and labeled slices of all three planes.

    ``boxes`` are in structure order and must already be validated.
    """
    labeled = []
    for plane in PLANES:
        for raw in extract_slices(volume, plane):
            labeled.append(LabeledSlice(prepare_slice(raw, target_mm), label_slice(raw, boxes)))
    return labeled
