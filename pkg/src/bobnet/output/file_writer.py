"""Evaluation report output for bobnet."""

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List

from bobnet.evaluation.metrics import (
    AggregateReport,
    DetectionReport,
    LocalizationReport,
    aggregate_by_structure,
)

SUMMARY_HEADER = ["structure", "wall_mean_mm", "wall_std_mm", "centroid_mean_mm", "centroid_std_mm"]
WALLS_HEADER = ["structure", "volume", "wall", "signed_mm"]


@dataclass
class LocalizationFailure:
    """A reference structure with no predicted box."""
    structure_name: str
    volume_id: str = ""

    def describe(self) -> str:
        where = f" in {self.volume_id}" if self.volume_id else ""
        return f"{self.structure_name}: localization failed{where} (no predicted box)"


@dataclass
class EvaluationWriter:
    """Collects per-scan results and writes them as text, CSV or JSON."""
    reports: List[LocalizationReport] = field(default_factory=list)
    failures: List[LocalizationFailure] = field(default_factory=list)
    detection: Dict[str, DetectionReport] = field(default_factory=dict)

    def add_report(self, report: LocalizationReport) -> None:
        self.reports.append(report)

    def add_failure(self, structure_name: str, volume_id: str = "") -> None:
        self.failures.append(LocalizationFailure(structure_name, volume_id))

    def add_detection(self, plane: str, report: DetectionReport) -> None:
        self.detection[plane] = self.detection.get(plane, DetectionReport()) + report

    def aggregates(self) -> Dict[str, AggregateReport]:
        return aggregate_by_structure(self.reports) if self.reports else {}

    def format_text(self) -> str:
        """Aligned plain-text report."""
        lines = []
        if self.reports:
            lines.append(f"{'structure':<16}{'volume':<16}{'mean |wall| mm':>16}{'centroid mm':>14}")
            for r in self.reports:
                lines.append(f"{r.structure_name:<16}{r.volume_id or '-':<16}"
                             f"{r.mean_abs_wall_mm:>16.3f}{r.centroid_mm:>14.3f}")
            lines.append("")
            lines.append(f"{'structure':<16}{'n':>4}{'wall mm (mean ± std)':>26}{'centroid mm (mean ± std)':>28}")
            for name, agg in self.aggregates().items():
                walls = f"{agg.wall_mean_mm:.3f} ± {agg.wall_std_mm:.3f}"
                centroid = f"{agg.centroid_mean_mm:.3f} ± {agg.centroid_std_mm:.3f}"
                lines.append(f"{name:<16}{agg.count:>4}{walls:>26}{centroid:>28}")
        for plane, report in self.detection.items():
            lines.append(f"{plane:<10} F1 {report.f1:.4f} "
                         f"(tp={report.true_positives} fp={report.false_positives} "
                         f"fn={report.false_negatives} tn={report.true_negatives})")
        lines.extend(failure.describe() for failure in self.failures)
        return "\n".join(lines) + "\n"

    def write_csv(self, output_file: Path) -> None:
        """Per-structure mean ± std of absolute walls and centroid distances."""
        with open(output_file, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(SUMMARY_HEADER)
            for name, agg in self.aggregates().items():
                writer.writerow([name, f"{agg.wall_mean_mm:.6f}", f"{agg.wall_std_mm:.6f}",
                                 f"{agg.centroid_mean_mm:.6f}", f"{agg.centroid_std_mm:.6f}"])

    def write_walls_csv(self, output_file: Path) -> None:
        """Signed distance of every wall of every box."""
        with open(output_file, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(WALLS_HEADER)
            for report in self.reports:
                for wall, distance in report.wall_items():
                    writer.writerow([report.structure_name, report.volume_id, wall, f"{distance:.6f}"])

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary."""
        return {
            "reports": [asdict(r) for r in self.reports],
            "aggregates": {name: asdict(agg) for name, agg in self.aggregates().items()},
            "detection": {
                plane: dict(asdict(report), f1=report.f1) for plane, report in self.detection.items()
            },
            "failures": [asdict(f) for f in self.failures],
        }

    def write_json(self, output_file: Path) -> None:
        with open(output_file, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2)
