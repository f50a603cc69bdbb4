"""Synthetic phantoms: geometric structures with exact ground-truth boxes."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from bobnet.data.dataset import BOXES_NAME, MANIFEST_NAME, VOLUME_NAME, split_dataset, write_split_manifest
from bobnet.imaging.boxes import BBox3D, write_boxes
from bobnet.imaging.volume import Volume3D, write_volume
from bobnet.utils.logging import get_logger

Seed = Union[int, np.random.SeedSequence]

logger = get_logger()


class ShapeKind(str, Enum):
    ELLIPSOID = "ellipsoid"
    TUBE = "tube"


@dataclass
class ShapeSpec:
    """A rasterizable shape in voxel coordinates.

    For a tube, ``radii[axis]`` is the half-length and the other two entries
    are the cross-section radii.
    """
    name: str
    kind: ShapeKind
    center: Tuple[float, float, float]
    radii: Tuple[float, float, float]
    intensity: float
    axis: int = 2

    def bounds(self) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
        lo = tuple(int(np.floor(c - r)) for c, r in zip(self.center, self.radii))
        hi = tuple(int(np.ceil(c + r)) for c, r in zip(self.center, self.radii))
        return lo, hi


@dataclass
class PhantomSpec:
    dims: Tuple[int, int, int]
    spacing_mm: Tuple[float, float, float]
    structures: List[ShapeSpec] = field(default_factory=list)
    distractors: List[ShapeSpec] = field(default_factory=list)
    background: float = 0.0
    noise_sigma: float = 0.0

    def validate(self) -> None:
        """Raises ValueError when a shape does not fit inside the volume."""
        if len(self.dims) != 3 or min(self.dims) < 1:
            raise ValueError(f"dims must be three positive extents, got {self.dims}")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        names = [s.name for s in self.structures]
        if len(set(names)) != len(names):
            raise ValueError(f"structure names must be unique, got {names}")
        for shape in self.structures + self.distractors:
            if min(shape.radii) <= 0:
                raise ValueError(f"{shape.name}: radii must be positive")
            if shape.kind is ShapeKind.TUBE and shape.axis not in (0, 1, 2):
                raise ValueError(f"{shape.name}: tube axis must be 0, 1 or 2")
            lo, hi = shape.bounds()
            if min(lo) < 0 or any(h >= d for h, d in zip(hi, self.dims)):
                raise ValueError(f"{shape.name}: shape spans {lo}..{hi}, outside dims {self.dims}")
            if not rasterize(shape, self.dims).any():
                raise ValueError(
                    f"{shape.name}: shape at {shape.center} with radii {shape.radii} covers no voxel"
                )


def rasterize(shape: ShapeSpec, dims: Sequence[int]) -> np.ndarray:
    """Boolean interior mask indexed ``[x, y, z]``."""
    grid = np.ogrid[tuple(slice(0, d) for d in dims)]
    terms = [((g - c) / r) ** 2 for g, c, r in zip(grid, shape.center, shape.radii)]
    if shape.kind is ShapeKind.ELLIPSOID:
        return terms[0] + terms[1] + terms[2] <= 1
    cross = [t for axis, t in enumerate(terms) if axis != shape.axis]
    return (cross[0] + cross[1] <= 1) & (terms[shape.axis] <= 1)


def mask_bounds(mask: np.ndarray) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
    if not mask.any():
        raise ValueError("empty mask has no bounds")
    occupied = np.nonzero(mask)
    return tuple(int(i.min()) for i in occupied), tuple(int(i.max()) for i in occupied)


def gen_phantom(spec: PhantomSpec, seed: Seed) -> Tuple[Volume3D, List[BBox3D]]:
    """Rasterize a phantom and return it with one tight box per target structure.

    Distractors are painted first, then targets in order; noise is added last.

    Raises:
        ValueError: invalid phantom description, including shapes leaving the volume.
    """
    spec.validate()
    dims = tuple(spec.dims)
    voxels = np.full(dims, spec.background, dtype=np.float64)

    for shape in spec.distractors:
        voxels[rasterize(shape, dims)] = shape.intensity

    boxes = []
    for shape in spec.structures:
        mask = rasterize(shape, dims)
        voxels[mask] = shape.intensity
        lo, hi = mask_bounds(mask)
        boxes.append(BBox3D(shape.name, lo, hi, spec.spacing_mm))  # type: ignore[arg-type]

    if spec.noise_sigma > 0:
        voxels += np.random.default_rng(seed).normal(0.0, spec.noise_sigma, dims)
    return Volume3D(voxels.astype(np.float32), spec.spacing_mm), boxes


@dataclass
class StructureTemplate:
    """Randomization ranges for one target, in millimetres."""
    name: str
    kind: ShapeKind
    radius_mm: Tuple[float, float]
    intensity: Tuple[float, float]
    length_mm: Tuple[float, float] = (0.0, 0.0)
    axis: int = 2


@dataclass
class PhantomRandomizer:
    """Draws phantom descriptions with randomized centers, radii and intensities.

    Radii are drawn as ``n + 0.5`` voxels, so the outermost slice on each side
    of a shape cuts a disc instead of a single voxel. The default background is
    air, which is also the value slices are padded with.
    """
    dims: Tuple[int, int, int] = (64, 64, 64)
    spacing_mm: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    structures: List[StructureTemplate] = field(default_factory=list)
    background: float = -1000.0
    noise_fraction: float = 0.2
    distractor_count: int = 0
    distractor_radius_mm: Tuple[float, float] = (2.0, 4.0)

    def _voxel_radii(self, radius_mm: float) -> List[float]:
        return [max(1, int(round(radius_mm / s))) + 0.5 for s in self.spacing_mm]

    def _radii(self, rng: np.random.Generator, template: StructureTemplate) -> Tuple[float, float, float]:
        radii = self._voxel_radii(rng.uniform(*template.radius_mm))
        if template.kind is ShapeKind.TUBE:
            # flat ends: an integer half-length keeps the end slices full discs
            half = rng.uniform(*template.length_mm) / 2
            radii[template.axis] = float(max(1, int(round(half / self.spacing_mm[template.axis]))))
        return tuple(radii)  # type: ignore[return-value]

    def _center(self, rng: np.random.Generator, radii: Sequence[float]) -> Tuple[int, int, int]:
        center = []
        for d, r in zip(self.dims, radii):
            reach = int(np.ceil(r))
            if 2 * reach > d - 1:
                raise ValueError(f"radius {r} does not fit into extent {d}")
            center.append(int(rng.integers(reach, d - reach)))
        return tuple(center)  # type: ignore[return-value]

    def sample(self, rng: np.random.Generator) -> PhantomSpec:
        structures = []
        for template in self.structures:
            radii = self._radii(rng, template)
            structures.append(ShapeSpec(
                name=template.name,
                kind=template.kind,
                center=self._center(rng, radii),
                radii=radii,
                intensity=float(rng.uniform(*template.intensity)),
                axis=template.axis,
            ))

        distractors = []
        intensities = [s.intensity for s in structures] or [self.background + 100.0]
        for k in range(self.distractor_count):
            radius = rng.uniform(*self.distractor_radius_mm)
            radii = tuple(self._voxel_radii(radius))
            distractors.append(ShapeSpec(
                name=f"distractor_{k}",
                kind=ShapeKind.ELLIPSOID,
                center=self._center(rng, radii),
                radii=radii,  # type: ignore[arg-type]
                intensity=float(rng.uniform(min(intensities), max(intensities))),
            ))

        contrast = min((abs(s.intensity - self.background) for s in structures), default=0.0)
        return PhantomSpec(
            dims=self.dims,
            spacing_mm=self.spacing_mm,
            structures=structures,
            distractors=distractors,
            background=self.background,
            noise_sigma=self.noise_fraction * contrast,
        )


DEFAULT_TEMPLATES: Dict[str, StructureTemplate] = {
    "heart": StructureTemplate("heart", ShapeKind.ELLIPSOID, radius_mm=(9.0, 14.0), intensity=(300.0, 500.0)),
    "aorta": StructureTemplate("aorta", ShapeKind.TUBE, radius_mm=(3.0, 5.0), intensity=(600.0, 900.0),
                               length_mm=(24.0, 40.0), axis=2),
}


def default_randomizer(structures: Sequence[str] = ("heart", "aorta"),
                       spacing_mm: Tuple[float, float, float] = (1.0, 1.0, 1.0),
                       dims: Tuple[int, int, int] = (64, 64, 64),
                       noise_fraction: float = 0.2, distractor_count: int = 0) -> PhantomRandomizer:
    """Heart ellipsoid and aorta tube setup; other names get a scaled-down ellipsoid."""
    templates = []
    for name in structures:
        if name in DEFAULT_TEMPLATES:
            templates.append(DEFAULT_TEMPLATES[name])
        else:
            templates.append(StructureTemplate(name, ShapeKind.ELLIPSOID, (5.0, 9.0), (300.0, 600.0)))
    return PhantomRandomizer(
        dims=dims,
        spacing_mm=spacing_mm,
        structures=templates,
        noise_fraction=noise_fraction,
        distractor_count=distractor_count,
    )


def gen_dataset(out_dir: Path, count: int, randomizer: PhantomRandomizer, seed: int,
                workers: int = 1) -> List[str]:
    """Write ``count`` phantoms in the dataset layout plus a split manifest.

    Each phantom draws its shapes and noise from seeds spawned off ``seed``, so
    output bytes do not depend on ``workers``.

    Raises:
        ValueError: count below 10.
    """
    if count < 10:
        raise ValueError(f"need at least 10 phantoms for a train/val/test split, got {count}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    root = np.random.SeedSequence(seed)
    phantom_seeds = root.spawn(count)
    split_seed = root.spawn(1)[0]
    volume_ids = [f"phantom_{i:03d}" for i in range(count)]

    def generate(args: Tuple[str, np.random.SeedSequence]) -> str:
        volume_id, seq = args
        spec_seed, noise_seed = seq.spawn(2)
        spec = randomizer.sample(np.random.default_rng(spec_seed))
        volume, boxes = gen_phantom(spec, noise_seed)
        directory = out_dir / volume_id
        write_volume(volume, directory / VOLUME_NAME)
        write_boxes(directory / BOXES_NAME, boxes)
        return volume_id

    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        list(executor.map(generate, zip(volume_ids, phantom_seeds)))

    split = split_dataset(volume_ids, np.random.default_rng(split_seed))
    write_split_manifest(out_dir / MANIFEST_NAME, split)
    logger.info(
        f"Wrote {count} phantoms to {out_dir}: {len(split.train)} train, "
        f"{len(split.validation)} val, {len(split.test)} test"
    )
    return volume_ids
