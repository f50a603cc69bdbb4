"""Detection and localization metrics."""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from bobnet.imaging.boxes import WALL_NAMES, BBox3D


def f1_score(tp: int, fp: int, fn: int) -> float:
    """Harmonic mean of precision and recall; 1.0 when there is nothing to find or flag."""
    if min(tp, fp, fn) < 0:
        raise ValueError("counts must be nonnegative")
    if tp == 0:
        return 1.0 if fp == 0 and fn == 0 else 0.0
    return 2 * tp / (2 * tp + fp + fn)


@dataclass
class DetectionReport:
    true_positives: int = 0
    false_positives: int = 0
    false_negatives: int = 0
    true_negatives: int = 0

    @property
    def precision(self) -> Optional[float]:
        predicted = self.true_positives + self.false_positives
        return self.true_positives / predicted if predicted else None

    @property
    def recall(self) -> Optional[float]:
        actual = self.true_positives + self.false_negatives
        return self.true_positives / actual if actual else None

    @property
    def f1(self) -> float:
        return f1_score(self.true_positives, self.false_positives, self.false_negatives)

    @property
    def total(self) -> int:
        return self.true_positives + self.false_positives + self.false_negatives + self.true_negatives

    def __add__(self, other: "DetectionReport") -> "DetectionReport":
        return DetectionReport(
            self.true_positives + other.true_positives,
            self.false_positives + other.false_positives,
            self.false_negatives + other.false_negatives,
            self.true_negatives + other.true_negatives,
        )


def detection_report(probabilities: np.ndarray, labels: np.ndarray,
                     threshold: float = 0.5) -> DetectionReport:
    """Confusion counts of thresholded presence probabilities against labels."""
    predicted = np.asarray(probabilities) >= threshold
    actual = np.asarray(labels, dtype=bool)
    if predicted.shape != actual.shape:
        raise ValueError(f"probabilities {predicted.shape} and labels {actual.shape} differ in shape")
    return DetectionReport(
        true_positives=int(np.sum(predicted & actual)),
        false_positives=int(np.sum(predicted & ~actual)),
        false_negatives=int(np.sum(~predicted & actual)),
        true_negatives=int(np.sum(~predicted & ~actual)),
    )


def _check_spacing(auto: BBox3D, ref: BBox3D) -> np.ndarray:
    if tuple(auto.spacing_mm) != tuple(ref.spacing_mm):
        raise ValueError(f"boxes have different spacing: {auto.spacing_mm} vs {ref.spacing_mm}")
    return np.asarray(ref.spacing_mm, dtype=np.float64)


def wall_distances(auto: BBox3D, ref: BBox3D) -> Tuple[float, ...]:
    """Signed wall distances in mm, ordered x_lo, x_hi, y_lo, y_hi, z_lo, z_hi.

    Positive means the automatic box extends past the reference wall.
    """
    spacing = _check_spacing(auto, ref)
    distances = []
    for axis in range(3):
        distances.append(float((ref.lo[axis] - auto.lo[axis]) * spacing[axis]))
        distances.append(float((auto.hi[axis] - ref.hi[axis]) * spacing[axis]))
    return tuple(distances)


def centroid_distance(auto: BBox3D, ref: BBox3D) -> float:
    """Euclidean distance in mm between box centers."""
    spacing = _check_spacing(auto, ref)
    offset = (np.asarray(auto.center) - np.asarray(ref.center)) * spacing
    return float(np.sqrt(np.sum(offset ** 2)))


@dataclass
class LocalizationReport:
    structure_name: str
    walls_mm: Tuple[float, ...]
    centroid_mm: float
    volume_id: str = ""

    @property
    def mean_abs_wall_mm(self) -> float:
        return float(np.mean(np.abs(self.walls_mm)))

    def wall_items(self) -> List[Tuple[str, float]]:
        return list(zip(WALL_NAMES, self.walls_mm))


def localization_report(auto: BBox3D, ref: BBox3D, volume_id: str = "") -> LocalizationReport:
    return LocalizationReport(ref.structure_name, wall_distances(auto, ref),
                              centroid_distance(auto, ref), volume_id)


@dataclass
class AggregateReport:
    """Mean and population standard deviation over scans."""
    structure_name: str
    count: int
    wall_mean_mm: float
    wall_std_mm: float
    centroid_mean_mm: float
    centroid_std_mm: float


def aggregate_report(reports: Sequence[LocalizationReport],
                     structure_name: Optional[str] = None) -> AggregateReport:
    """Pool absolute wall distances over all walls and scans, and centroid distances over scans.

    Raises:
        ValueError: no reports.
    """
    if not reports:
        raise ValueError("cannot aggregate an empty set of reports")
    walls = np.abs(np.array([r.walls_mm for r in reports], dtype=np.float64)).ravel()
    centroids = np.array([r.centroid_mm for r in reports], dtype=np.float64)
    return AggregateReport(
        structure_name=structure_name or reports[0].structure_name,
        count=len(reports),
        wall_mean_mm=float(walls.mean()),
        wall_std_mm=float(walls.std()),
        centroid_mean_mm=float(centroids.mean()),
        centroid_std_mm=float(centroids.std()),
    )


def aggregate_by_structure(reports: Sequence[LocalizationReport]) -> Dict[str, AggregateReport]:
    grouped: Dict[str, List[LocalizationReport]] = {}
    for report in reports:
        grouped.setdefault(report.structure_name, []).append(report)
    return {name: aggregate_report(items, name) for name, items in grouped.items()}


@dataclass(frozen=True)
class McNemarResult:
    b: int
    c: int
    statistic: float
    p_value: float


def mcnemar(correct_a: Sequence[bool], correct_b: Sequence[bool]) -> McNemarResult:
    """Continuity-corrected McNemar test on paired per-item correctness.

    ``b`` counts items only A got right, ``c`` items only B got right.
    """
    a = np.asarray(correct_a, dtype=bool)
    b_arr = np.asarray(correct_b, dtype=bool)
    if a.shape != b_arr.shape:
        raise ValueError(f"paired sequences differ in length: {a.shape} vs {b_arr.shape}")
    b = int(np.sum(a & ~b_arr))
    c = int(np.sum(~a & b_arr))
    if b + c == 0:
        return McNemarResult(b, c, 0.0, 1.0)
    statistic = max(abs(b - c) - 1, 0) ** 2 / (b + c)
    return McNemarResult(b, c, float(statistic), float(stats.chi2.sf(statistic, df=1)))
