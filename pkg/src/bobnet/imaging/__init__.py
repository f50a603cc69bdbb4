"""Volume and bounding-box file formats."""

from .boxes import BBox3D, load_boxes, validate_boxes, write_boxes
from .volume import Volume3D, load_volume, read_volume_header, write_volume

__all__ = [
    "BBox3D",
    "load_boxes",
    "validate_boxes",
    "write_boxes",
    "Volume3D",
    "load_volume",
    "read_volume_header",
    "write_volume",
]
