"""Bounding-box annotations.

One box per line, inclusive voxel indices::

    # name x_lo x_hi y_lo y_hi z_lo z_hi
    heart 10 20 12 18 5 30
"""

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from bobnet.imaging.volume import Volume3D, VolumeHeader
from bobnet.utils.errors import BoxFormatError

AXES = "xyz"
WALL_NAMES = ("x_lo", "x_hi", "y_lo", "y_hi", "z_lo", "z_hi")

Index3 = Tuple[int, int, int]


@dataclass(frozen=True)
class BBox3D:
    """Axis-aligned box with inclusive ``lo``/``hi`` voxel indices."""
    structure_name: str
    lo: Index3
    hi: Index3
    spacing_mm: Tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self) -> None:
        for axis in range(3):
            if self.lo[axis] < 0:
                raise ValueError(f"{self.structure_name}: negative {AXES[axis]} index")
            if self.hi[axis] < self.lo[axis]:
                raise ValueError(f"{self.structure_name}: hi < lo on {AXES[axis]}")

    @property
    def center(self) -> Tuple[float, float, float]:
        return tuple((l + h) / 2 for l, h in zip(self.lo, self.hi))  # type: ignore[return-value]

    @property
    def extent(self) -> Index3:
        return tuple(h - l + 1 for l, h in zip(self.lo, self.hi))  # type: ignore[return-value]

    def fits(self, dims: Sequence[int]) -> bool:
        return all(h < d for h, d in zip(self.hi, dims))

    def with_spacing(self, spacing_mm: Sequence[float]) -> "BBox3D":
        return replace(self, spacing_mm=tuple(float(s) for s in spacing_mm))

    def to_line(self) -> str:
        bounds = " ".join(f"{self.lo[a]} {self.hi[a]}" for a in range(3))
        return f"{self.structure_name} {bounds}"


def parse_box_line(line: str, line_number: Optional[int] = None) -> BBox3D:
    tokens = line.split()
    if len(tokens) != 7:
        raise BoxFormatError(
            f"expected 'name x_lo x_hi y_lo y_hi z_lo z_hi', got {len(tokens)} tokens", line_number
        )
    name = tokens[0]
    try:
        values = [int(token) for token in tokens[1:]]
    except ValueError as e:
        raise BoxFormatError(f"{name}: box bounds must be integers", line_number) from e
    lo = (values[0], values[2], values[4])
    hi = (values[1], values[3], values[5])
    try:
        return BBox3D(name, lo, hi)
    except ValueError as e:
        raise BoxFormatError(str(e), line_number) from e


def load_boxes(path: Path) -> List[BBox3D]:
    """Parse a box file; ``#`` starts a comment.

    Raises:
        BoxFormatError: wrong token count, non-integer bounds, hi < lo or a
            repeated structure name.
    """
    boxes: List[BBox3D] = []
    seen = set()
    for line_number, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        box = parse_box_line(line, line_number)
        if box.structure_name in seen:
            raise BoxFormatError(f"duplicate structure {box.structure_name!r}", line_number)
        seen.add(box.structure_name)
        boxes.append(box)
    return boxes


def write_boxes(path: Path, boxes: Iterable[BBox3D], missing: Iterable[str] = ()) -> None:
    """Write boxes, plus ``# <name> not found`` for structures without one."""
    lines = [box.to_line() for box in boxes]
    lines.extend(f"# {name} not found" for name in missing)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(f"{line}\n" for line in lines), encoding="utf-8")


def validate_boxes(boxes: Iterable[BBox3D], volume: Union[Volume3D, VolumeHeader]) -> List[BBox3D]:
    """Check boxes lie inside the volume (or a header of one) and attach its spacing.

    Raises:
        ValueError: a box reaches past the volume extents.
    """
    validated = []
    for box in boxes:
        if not box.fits(volume.dims):
            raise ValueError(f"{box.structure_name}: box hi {box.hi} outside volume dims {volume.dims}")
        validated.append(box.with_spacing(volume.spacing_mm))
    return validated


def boxes_by_name(boxes: Iterable[BBox3D]) -> Dict[str, BBox3D]:
    return {box.structure_name: box for box in boxes}
