"""Dataset directory layout and the train/validation/test split.

::

    <root>/split.txt            "<id> train|val|test" per line
    <root>/<id>/volume.mhd
    <root>/<id>/volume.raw
    <root>/<id>/boxes.txt
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from bobnet.data.slicing import LabeledSlice, prepare_volume_slices
from bobnet.imaging.boxes import BBox3D, boxes_by_name, load_boxes, validate_boxes
from bobnet.imaging.volume import Volume3D, load_volume
from bobnet.utils.errors import DatasetError
from bobnet.utils.logging import get_logger

MANIFEST_NAME = "split.txt"
VOLUME_NAME = "volume.mhd"
BOXES_NAME = "boxes.txt"
PARTITIONS = ("train", "val", "test")
MIN_VOLUMES = 10

logger = get_logger()


@dataclass
class DatasetSplit:
    """Volume-level partition; no id appears twice."""
    train: List[str] = field(default_factory=list)
    validation: List[str] = field(default_factory=list)
    test: List[str] = field(default_factory=list)

    def partition(self, name: str) -> List[str]:
        if name == "train":
            return self.train
        if name in ("val", "validation"):
            return self.validation
        if name == "test":
            return self.test
        raise ValueError(f"unknown partition {name!r}; expected one of {', '.join(PARTITIONS)}")

    def assignments(self) -> List[Tuple[str, str]]:
        return (
            [(v, "train") for v in self.train]
            + [(v, "val") for v in self.validation]
            + [(v, "test") for v in self.test]
        )


def split_dataset(volume_ids: Sequence[str], rng: np.random.Generator) -> DatasetSplit:
    """Half of the volumes for training (a tenth of those held out for validation), half for test.

    Raises:
        ValueError: fewer than 10 volumes, or repeated ids.
    """
    ids = list(volume_ids)
    if len(ids) < MIN_VOLUMES:
        raise ValueError(f"need at least {MIN_VOLUMES} volumes to split, got {len(ids)}")
    if len(set(ids)) != len(ids):
        raise ValueError("volume ids must be unique")

    shuffled = [ids[i] for i in rng.permutation(len(ids))]
    n_train_total = len(ids) // 2
    n_val = max(1, -(-n_train_total // 10))
    n_train = n_train_total - n_val
    return DatasetSplit(
        train=shuffled[:n_train],
        validation=shuffled[n_train:n_train_total],
        test=shuffled[n_train_total:],
    )


def write_split_manifest(path: Path, split: DatasetSplit) -> None:
    lines = [f"{volume_id} {partition}\n" for volume_id, partition in split.assignments()]
    Path(path).write_text("".join(lines), encoding="utf-8")


def read_split_manifest(path: Path) -> DatasetSplit:
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"split manifest not found: {path}")
    split = DatasetSplit()
    seen = set()
    for line_number, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) != 2 or tokens[1] not in PARTITIONS:
            raise DatasetError(f"{path.name} line {line_number}: expected '<id> train|val|test'")
        if tokens[0] in seen:
            raise DatasetError(f"{path.name} line {line_number}: volume {tokens[0]!r} listed twice")
        seen.add(tokens[0])
        split.partition(tokens[1]).append(tokens[0])
    return split


@dataclass
class VolumeRecord:
    volume_id: str
    directory: Path

    @property
    def header_path(self) -> Path:
        return self.directory / VOLUME_NAME

    @property
    def boxes_path(self) -> Path:
        return self.directory / BOXES_NAME


@dataclass
class Dataset:
    """A dataset directory with its split and structure list."""
    root: Path
    split: DatasetSplit
    structure_names: List[str]
    records: Dict[str, VolumeRecord]

    def ids(self, partition: str) -> List[str]:
        return list(self.split.partition(partition))

    def load_sample(self, volume_id: str,
                    structure_names: Optional[Sequence[str]] = None) -> Tuple[Volume3D, List[BBox3D]]:
        """Volume plus validated boxes in ``structure_names`` order.

        Raises:
            DatasetError: a structure is not annotated or a box lies outside the volume.
        """
        record = self.records[volume_id]
        names = list(structure_names or self.structure_names)
        volume = load_volume(record.header_path)
        annotated = boxes_by_name(load_boxes(record.boxes_path))
        missing = [name for name in names if name not in annotated]
        if missing:
            raise DatasetError(f"volume {volume_id}: no box for {', '.join(missing)}")
        try:
            boxes = validate_boxes([annotated[name] for name in names], volume)
        except ValueError as e:
            raise DatasetError(f"volume {volume_id}: {e}") from e
        return volume, boxes


def load_dataset(root: Path) -> Dataset:
    """Open a dataset directory, checking every listed volume is complete.

    Raises:
        DatasetError: missing manifest, volume directory, header or box file
            (the message names the volume).
    """
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset directory not found: {root}")
    split = read_split_manifest(root / MANIFEST_NAME)

    records: Dict[str, VolumeRecord] = {}
    for volume_id, _ in split.assignments():
        record = VolumeRecord(volume_id, root / volume_id)
        if not record.header_path.exists():
            raise DatasetError(f"volume {volume_id}: {VOLUME_NAME} not found in {record.directory}")
        if not record.boxes_path.exists():
            raise DatasetError(f"volume {volume_id}: {BOXES_NAME} not found in {record.directory}")
        records[volume_id] = record
    if not records:
        raise DatasetError(f"{root / MANIFEST_NAME} lists no volumes")

    first = next(iter(records.values()))
    structure_names = [box.structure_name for box in load_boxes(first.boxes_path)]
    if not structure_names:
        raise DatasetError(f"volume {first.volume_id}: {BOXES_NAME} has no boxes")
    logger.info(
        f"Dataset {root}: {len(split.train)} train, {len(split.validation)} val, "
        f"{len(split.test)} test; structures {', '.join(structure_names)}"
    )
    return Dataset(root, split, structure_names, records)


def load_labeled_slices(dataset: Dataset, volume_ids: Sequence[str], target_mm: float,
                        structure_names: Optional[Sequence[str]] = None,
                        workers: int = 1) -> List[LabeledSlice]:
    """Prepared slices of several volumes, concatenated in ``volume_ids`` order."""
    def prepare(volume_id: str) -> List[LabeledSlice]:
        volume, boxes = dataset.load_sample(volume_id, structure_names)
        return prepare_volume_slices(volume, boxes, target_mm)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        per_volume = list(executor.map(prepare, volume_ids))
    return [item for items in per_volume for item in items]
