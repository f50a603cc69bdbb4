"""Rich terminal output for training, localization and evaluation."""

from typing import TYPE_CHECKING, Dict, Iterable, Optional

from rich.console import Console
from rich.progress import BarColumn, Progress, TextColumn, TimeRemainingColumn
from rich.table import Table

from bobnet.evaluation.metrics import AggregateReport, DetectionReport, McNemarResult

if TYPE_CHECKING:
    from bobnet.hooks.types import EpochContext
    from bobnet.localization.fusion import LocalizationResult
    from bobnet.output.file_writer import EvaluationWriter
    from bobnet.training.trainer import TrainingResult

console = Console()


def make_progress(target: Optional[Console] = None) -> Progress:
    """Bar with percentage and time remaining; finished bars disappear."""
    return Progress(
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        "[progress.percentage]{task.percentage:>3.0f}%",
        "•",
        TimeRemainingColumn(),
        console=target or console,
        transient=True,
    )


def print_epoch_summary(context: "EpochContext") -> None:
    planes = "  ".join(f"{name[:3]} {f1:.3f}" for name, f1 in context.plane_f1.items())
    console.print(
        f"[cyan]epoch {context.epoch:>3}/{context.epochs}[/cyan]  "
        f"loss {context.loss:.4f}  lr {context.learning_rate:.2g}  "
        f"[green]val F1 {context.validation_f1:.4f}[/green]  [dim]{planes}  {context.seconds:.1f}s[/dim]"
    )


def print_training_summary(result: "TrainingResult") -> None:
    table = Table(title="Training Summary")
    table.add_column("Metric", style="cyan")
    table.add_column("Value", style="green")

    table.add_row("Structures", ", ".join(result.structure_names))
    table.add_row("Parameters", f"{result.model.parameter_count():,}")
    table.add_row("Epochs", str(len(result.history)))
    if result.history:
        last = result.history[-1]
        curve = result.validation_curve[-5:]
        table.add_row("Final loss", f"{last.loss:.4f}")
        table.add_row("Final validation F1", f"{last.validation_f1:.4f}")
        table.add_row("Last-5 F1 range", f"{max(curve) - min(curve):.4f}")
        table.add_row("Total time", f"{sum(r.seconds for r in result.history):.1f} seconds")
    console.print(table)


def print_localization(result: "LocalizationResult", show_time: bool = False) -> None:
    table = Table(title="Localization")
    table.add_column("Structure", style="cyan")
    table.add_column("x", justify="right")
    table.add_column("y", justify="right")
    table.add_column("z", justify="right")

    for name, box in result.boxes:
        if box is None:
            table.add_row(name, "[red]not found[/red]", "", "")
        else:
            table.add_row(name, *(f"{box.lo[a]}..{box.hi[a]}" for a in range(3)))
    console.print(table)

    if show_time:
        console.print(
            f"[dim]{result.slice_count} slices, {result.mean_ms_per_slice:.2f} ms per slice, "
            f"{result.total_seconds:.2f} s total[/dim]"
        )


def print_detection(detection: Dict[str, DetectionReport]) -> None:
    table = Table(title="Slice Detection")
    table.add_column("Plane", style="cyan")
    for column in ("TP", "FP", "FN", "TN"):
        table.add_column(column, justify="right")
    table.add_column("F1", justify="right", style="green")
    for plane, report in detection.items():
        table.add_row(plane, str(report.true_positives), str(report.false_positives),
                      str(report.false_negatives), str(report.true_negatives), f"{report.f1:.4f}")
    console.print(table)


def print_aggregates(aggregates: Iterable[AggregateReport]) -> None:
    table = Table(title="Localization Error (mm)")
    table.add_column("Structure", style="cyan")
    table.add_column("Scans", justify="right")
    table.add_column("Wall distance", justify="right")
    table.add_column("Centroid distance", justify="right")
    for agg in aggregates:
        table.add_row(agg.structure_name, str(agg.count),
                      f"{agg.wall_mean_mm:.2f} ± {agg.wall_std_mm:.2f}",
                      f"{agg.centroid_mean_mm:.2f} ± {agg.centroid_std_mm:.2f}")
    console.print(table)


def print_evaluation(writer: "EvaluationWriter", title: Optional[str] = None) -> None:
    if title:
        console.print(f"[bold]{title}[/bold]")
    if writer.detection:
        print_detection(writer.detection)
    if writer.reports:
        print_aggregates(writer.aggregates().values())
    for failure in writer.failures:
        console.print(f"[red]{failure.describe()}[/red]")


def print_mcnemar(result: McNemarResult) -> None:
    table = Table(title="McNemar Test")
    table.add_column("b (only A correct)", justify="right")
    table.add_column("c (only B correct)", justify="right")
    table.add_column("Statistic", justify="right")
    table.add_column("p", justify="right", style="green")
    table.add_row(str(result.b), str(result.c), f"{result.statistic:.4f}", f"{result.p_value:.4f}")
    console.print(table)
