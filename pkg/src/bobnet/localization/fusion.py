"""Fuse per-plane slice probabilities into 3D bounding boxes.

A voxel (i, j, k) is kept for structure n when its sagittal, coronal and
axial slice probabilities all reach the threshold; the largest connected
component of the kept voxels gives the box.
"""

import csv
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from bobnet.data.slicing import PLANES, Plane, extract_slices, pad_to_minimum, prepare_slice
from bobnet.imaging.boxes import BBox3D
from bobnet.imaging.volume import Volume3D
from bobnet.model.bobnet import BoBNet
from bobnet.utils.errors import ProfileFormatError
from bobnet.utils.logging import get_logger, log_performance

PROFILE_HEADER = ("plane", "slice_index", "structure", "probability")
CONNECTIVITY_RANK = {6: 1, 18: 2, 26: 3}

logger = get_logger()


@dataclass
class FusionConfig:
    threshold: float = 0.5
    connectivity: int = 6

    def __post_init__(self) -> None:
        if not 0 < self.threshold < 1:
            raise ValueError(f"threshold must be in (0, 1), got {self.threshold}")
        if self.connectivity not in CONNECTIVITY_RANK:
            raise ValueError(f"connectivity must be 6, 18 or 26, got {self.connectivity}")


@dataclass
class StructureProfile:
    """Probabilities of one structure along x (sagittal), y (coronal) and z (axial)."""
    sagittal: np.ndarray
    coronal: np.ndarray
    axial: np.ndarray

    @property
    def dims(self) -> Tuple[int, int, int]:
        return len(self.sagittal), len(self.coronal), len(self.axial)


@dataclass
class DetectionProfile:
    """Per-plane probability arrays of shape ``(extent, N)``."""
    structure_names: List[str]
    sagittal: np.ndarray
    coronal: np.ndarray
    axial: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.structure_names)
        for plane in PLANES:
            values = self.plane(plane)
            if values.ndim != 2 or values.shape[1] != n:
                raise ValueError(f"{plane.value} profile must have shape (extent, {n}), got {values.shape}")
            if values.size and (values.min() < 0 or values.max() > 1):
                raise ValueError(f"{plane.value} probabilities must lie in [0, 1]")

    @property
    def dims(self) -> Tuple[int, int, int]:
        return len(self.sagittal), len(self.coronal), len(self.axial)

    def plane(self, plane: Plane) -> np.ndarray:
        return getattr(self, Plane(plane).value)

    def for_structure(self, n: int) -> StructureProfile:
        return StructureProfile(self.sagittal[:, n], self.coronal[:, n], self.axial[:, n])


def build_mask(profile: StructureProfile, config: FusionConfig,
               dims: Optional[Sequence[int]] = None) -> np.ndarray:
    """Boolean mask with ``B[i, j, k] = s_i >= t and c_j >= t and a_k >= t``.

    Raises:
        ValueError: profile lengths differ from ``dims``.
    """
    if dims is not None and tuple(dims) != profile.dims:
        raise ValueError(f"profile lengths {profile.dims} do not match volume dims {tuple(dims)}")
    t = config.threshold
    s = np.asarray(profile.sagittal) >= t
    c = np.asarray(profile.coronal) >= t
    a = np.asarray(profile.axial) >= t
    return s[:, None, None] & c[None, :, None] & a[None, None, :]


def largest_component(mask: np.ndarray, connectivity: int = 6) -> np.ndarray:
    """Keep the largest connected component.

    Equal sizes resolve to the component whose first voxel in raster order
    comes first; an empty mask stays empty.
    """
    structure = ndimage.generate_binary_structure(3, CONNECTIVITY_RANK[connectivity])
    labels, count = ndimage.label(mask, structure=structure)
    if count == 0:
        return np.zeros(mask.shape, dtype=bool)
    sizes = np.bincount(labels.ravel())[1:]
    # labels are numbered in raster order, argmax takes the first maximum
    return labels == int(np.argmax(sizes)) + 1


def mask_to_bbox(mask: np.ndarray, structure_name: str,
                 spacing_mm: Sequence[float] = (1.0, 1.0, 1.0)) -> Optional[BBox3D]:
    """Inclusive extents of the occupied voxels, or None for an empty mask."""
    occupied = np.nonzero(mask)
    if occupied[0].size == 0:
        return None
    lo = tuple(int(axis.min()) for axis in occupied)
    hi = tuple(int(axis.max()) for axis in occupied)
    return BBox3D(structure_name, lo, hi, tuple(float(s) for s in spacing_mm))  # type: ignore[arg-type]


def fuse_structure(profile: StructureProfile, name: str, config: FusionConfig,
                   spacing_mm: Sequence[float] = (1.0, 1.0, 1.0)) -> Optional[BBox3D]:
    mask = largest_component(build_mask(profile, config), config.connectivity)
    return mask_to_bbox(mask, name, spacing_mm)


def fuse_profile(profile: DetectionProfile, config: FusionConfig,
                 spacing_mm: Sequence[float] = (1.0, 1.0, 1.0)) -> List[Tuple[str, Optional[BBox3D]]]:
    return [
        (name, fuse_structure(profile.for_structure(n), name, config, spacing_mm))
        for n, name in enumerate(profile.structure_names)
    ]


def ideal_profile(dims: Sequence[int], boxes: Sequence[BBox3D]) -> DetectionProfile:
    """Indicator profile: 1 inside each box's range along every plane normal, else 0."""
    per_plane = {}
    for plane in PLANES:
        index = np.arange(dims[plane.axis])[:, None]
        lo = np.array([box.lo[plane.axis] for box in boxes])[None, :]
        hi = np.array([box.hi[plane.axis] for box in boxes])[None, :]
        per_plane[plane.value] = ((index >= lo) & (index <= hi)).astype(np.float64).reshape(
            dims[plane.axis], len(boxes)
        )
    return DetectionProfile([box.structure_name for box in boxes], **per_plane)


@dataclass
class LocalizationResult:
    boxes: List[Tuple[str, Optional[BBox3D]]]
    profile: DetectionProfile
    slice_count: int = 0
    total_seconds: float = 0.0
    inference_seconds: float = 0.0

    @property
    def mean_ms_per_slice(self) -> float:
        return 1000.0 * self.inference_seconds / self.slice_count if self.slice_count else 0.0

    @property
    def found(self) -> Dict[str, BBox3D]:
        return {name: box for name, box in self.boxes if box is not None}

    @property
    def missing(self) -> List[str]:
        return [name for name, box in self.boxes if box is None]


def localize(model: BoBNet, volume: Volume3D, structure_names: Sequence[str],
             config: Optional[FusionConfig] = None, target_mm: float = 1.5,
             workers: int = 1) -> LocalizationResult:
    """Predict every slice of the three planes and fuse the profile per structure.

    Slices are predicted one at a time, optionally on several threads;
    results are assembled by slice index, so the output does not depend on
    ``workers``.
    """
    config = config or FusionConfig()
    if len(structure_names) != model.num_structures:
        raise ValueError(
            f"{len(structure_names)} structure names for a model with {model.num_structures} outputs"
        )
    start = time.perf_counter()

    prepared: List[Tuple[Plane, np.ndarray]] = []
    for plane in PLANES:
        for raw in extract_slices(volume, plane):
            prepared.append((plane, pad_to_minimum(prepare_slice(raw, target_mm).pixels)))

    def predict(item: Tuple[Plane, np.ndarray]) -> np.ndarray:
        return model.predict_slice(item[1])

    inference_start = time.perf_counter()
    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        predictions = list(executor.map(predict, prepared))
    inference_seconds = time.perf_counter() - inference_start

    per_plane: Dict[str, List[np.ndarray]] = {plane.value: [] for plane in PLANES}
    for (plane, _), probs in zip(prepared, predictions):
        per_plane[plane.value].append(probs)
    profile = DetectionProfile(
        list(structure_names),
        **{name: np.clip(np.stack(rows).astype(np.float64), 0.0, 1.0) for name, rows in per_plane.items()},
    )

    boxes = fuse_profile(profile, config, volume.spacing_mm)
    total_seconds = time.perf_counter() - start
    log_performance(logger, "localize", total_seconds,
                    {"slices": len(prepared), "workers": workers})
    return LocalizationResult(boxes, profile, len(prepared), total_seconds, inference_seconds)


class ProfileRow(NamedTuple):
    plane: str
    slice_index: int
    structure: str
    probability: float

    @property
    def key(self) -> Tuple[str, int, str]:
        return self.plane, self.slice_index, self.structure


def profile_rows(profile: DetectionProfile) -> List[ProfileRow]:
    rows = []
    for plane in PLANES:
        values = profile.plane(plane)
        for n, name in enumerate(profile.structure_names):
            for index in range(values.shape[0]):
                rows.append(ProfileRow(plane.value, index, name, float(values[index, n])))
    return rows


def write_profile_csv(path: Path, profile: DetectionProfile) -> None:
    """One row per (plane, slice, structure), probabilities with 6 decimals."""
    write_profile_rows(path, profile_rows(profile))


def write_profile_rows(path: Path, rows: Sequence[ProfileRow]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(PROFILE_HEADER)
        for row in rows:
            writer.writerow([row.plane, row.slice_index, row.structure, f"{row.probability:.6f}"])


def read_profile_csv(path: Path) -> List[ProfileRow]:
    """Parse a profile CSV.

    Raises:
        ProfileFormatError: wrong header, unknown plane, bad numbers or a
            repeated key.
    """
    path = Path(path)
    rows: List[ProfileRow] = []
    seen = set()
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != PROFILE_HEADER:
            raise ProfileFormatError(f"{path}: expected header {','.join(PROFILE_HEADER)}")
        planes = {plane.value for plane in PLANES}
        for line_number, record in enumerate(reader, 2):
            if not record:
                continue
            if len(record) != 4:
                raise ProfileFormatError(f"{path} line {line_number}: expected 4 fields")
            plane, index, structure, probability = (v.strip() for v in record)
            if plane not in planes:
                raise ProfileFormatError(f"{path} line {line_number}: unknown plane {plane!r}")
            try:
                row = ProfileRow(plane, int(index), structure, float(probability))
            except ValueError as e:
                raise ProfileFormatError(f"{path} line {line_number}: {e}") from e
            if not 0 <= row.probability <= 1:
                raise ProfileFormatError(f"{path} line {line_number}: probability outside [0, 1]")
            if row.key in seen:
                raise ProfileFormatError(f"{path} line {line_number}: duplicate key {row.key}")
            seen.add(row.key)
            rows.append(row)
    return rows
