"""Slice-probability fusion into 3D boxes."""

from .fusion import (
    DetectionProfile,
    FusionConfig,
    LocalizationResult,
    StructureProfile,
    build_mask,
    ideal_profile,
    largest_component,
    localize,
    mask_to_bbox,
    read_profile_csv,
    write_profile_csv,
)

__all__ = [
    "DetectionProfile",
    "FusionConfig",
    "LocalizationResult",
    "StructureProfile",
    "build_mask",
    "ideal_profile",
    "largest_component",
    "localize",
    "mask_to_bbox",
    "read_profile_csv",
    "write_profile_csv",
]
