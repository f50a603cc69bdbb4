"""Slices, minibatches, dataset layout and synthetic phantoms."""

from .batching import make_minibatch, nearest_rank
from .dataset import Dataset, DatasetSplit, load_dataset, split_dataset
from .phantom import PhantomRandomizer, PhantomSpec, ShapeKind, ShapeSpec, default_randomizer, gen_dataset, gen_phantom
from .slicing import (
    PLANES,
    LabeledSlice,
    Plane,
    Slice2D,
    SliceLabel,
    extract_slices,
    label_slice,
    normalize_intensity,
    pad_to_minimum,
    prepare_volume_slices,
    resample_slice,
    rotate_augment,
)

__all__ = [
    "make_minibatch",
    "nearest_rank",
    "Dataset",
    "DatasetSplit",
    "load_dataset",
    "split_dataset",
    "PhantomRandomizer",
    "PhantomSpec",
    "ShapeKind",
    "ShapeSpec",
    "default_randomizer",
    "gen_dataset",
    "gen_phantom",
    "PLANES",
    "LabeledSlice",
    "Plane",
    "Slice2D",
    "SliceLabel",
    "extract_slices",
    "label_slice",
    "normalize_intensity",
    "pad_to_minimum",
    "prepare_volume_slices",
    "resample_slice",
    "rotate_augment",
]
