#!/usr/bin/env python3
"""
BoBNet CLI: localize structures in 3D volumes from 2D slice detections
"""

from pathlib import Path
from typing import List, NoReturn, Optional, Tuple

import typer

from bobnet.data.dataset import load_dataset
from bobnet.data.phantom import default_randomizer, gen_dataset
from bobnet.data.slicing import PLANES
from bobnet.evaluation.comparison import compare_predictions
from bobnet.evaluation.metrics import detection_report, localization_report
from bobnet.hooks.factory import HookFactory
from bobnet.imaging.boxes import boxes_by_name, load_boxes, validate_boxes, write_boxes
from bobnet.imaging.volume import load_volume, read_volume_header
from bobnet.localization.fusion import ideal_profile, localize, read_profile_csv, write_profile_csv
from bobnet.model.checkpoint import load_checkpoint, load_training_spacing, save_checkpoint
from bobnet.output.display import (
    console,
    make_progress,
    print_evaluation,
    print_localization,
    print_mcnemar,
    print_training_summary,
)
from bobnet.output.file_writer import EvaluationWriter
from bobnet.training.trainer import train_on_dataset
from bobnet.utils.config import RunConfig
from bobnet.utils.config_file import ConfigManager
from bobnet.utils.errors import BobnetError
from bobnet.utils.logging import console as log_console
from bobnet.utils.logging import get_error_handler, get_logger, log_system_info, setup_logging

app = typer.Typer(
    name="bobnet",
    help="Bounding-box localization of structures in 3D volumes",
    add_completion=False,
)

# Add subcommands
config_app = typer.Typer(help="Configuration management commands")
app.add_typer(config_app, name="config")

HANDLED_ERRORS = (BobnetError, ValueError, OSError)
LOG_LEVEL_HELP = "Log level (DEBUG, INFO, WARNING, ERROR)"


def _fail(error: BaseException, context: str) -> NoReturn:
    """Report an error and exit with 1 (validation) or 2 (I/O or format)."""
    raise typer.Exit(get_error_handler().handle_error(error, context))


def _parse_triple(text: str, kind: type, option: str) -> Tuple:
    try:
        values = tuple(kind(part) for part in text.split(","))
    except ValueError as e:
        raise ValueError(f"{option}: expected three comma-separated numbers, got {text!r}") from e
    if len(values) != 3:
        raise ValueError(f"{option}: expected three comma-separated numbers, got {text!r}")
    return values


def _parse_names(text: Optional[str]) -> Optional[List[str]]:
    if not text:
        return None
    names = [name.strip() for name in text.split(",") if name.strip()]
    return names or None


def _load_run_config(config_file: Optional[Path], **overrides: object) -> RunConfig:
    manager = ConfigManager()
    manager.load_config(config_file)
    return manager.merge_with_cli_args(**overrides)


def _inference_spacing(model: Path, config: RunConfig) -> float:
    """Spacing stored with the checkpoint, else the configured one."""
    trained = load_training_spacing(model)
    if trained is None:
        return config.target_spacing_mm
    if trained != config.target_spacing_mm:
        get_logger().warning(
            f"{model} was trained at {trained} mm; using it instead of "
            f"target_spacing_mm={config.target_spacing_mm}"
        )
    return trained


@app.command("gen-synth")
def gen_synth(
    out: Path = typer.Option(..., "--out", "-o", help="Output dataset directory"),
    count: int = typer.Option(60, "--count", "-n", help="Number of phantoms (at least 10)"),
    seed: int = typer.Option(0, "--seed", "-s", help="Random seed"),
    structures: str = typer.Option("heart,aorta", "--structures", help="Comma-separated target structures"),
    spacing: str = typer.Option("1.0,1.0,1.0", "--spacing", help="Voxel spacing in mm as X,Y,Z"),
    dims: str = typer.Option("64,64,64", "--dims", help="Volume extents as X,Y,Z"),
    noise: float = typer.Option(0.2, "--noise", help="Noise sigma as a fraction of structure contrast"),
    distractors: int = typer.Option(0, "--distractors", help="Unlabeled distractor shapes per phantom"),
    workers: int = typer.Option(1, "--workers", help="Parallel phantom writers"),
    log_level: str = typer.Option("WARNING", "--log-level", help=LOG_LEVEL_HELP),
):
    """Generate a synthetic phantom dataset with a train/val/test split."""
    setup_logging(level=log_level)
    try:
        randomizer = default_randomizer(
            structures=_parse_names(structures) or ["heart", "aorta"],
            spacing_mm=_parse_triple(spacing, float, "--spacing"),
            dims=_parse_triple(dims, int, "--dims"),
            noise_fraction=noise,
            distractor_count=distractors,
        )
        volume_ids = gen_dataset(out, count, randomizer, seed, workers=workers)
    except HANDLED_ERRORS as e:
        _fail(e, "generating phantoms")

    console.print(f"[green]Wrote {len(volume_ids)} phantoms to {out}[/green]")


@app.command("train")
def train(
    data: Path = typer.Option(..., "--data", "-d", help="Dataset directory"),
    out: Path = typer.Option(..., "--out", "-o", help="Checkpoint path"),
    config_file: Optional[Path] = typer.Option(None, "--config", "-c", help="Run configuration file"),
    structures: Optional[str] = typer.Option(None, "--structures", help="Train on these structures only (comma-separated)"),
    epochs: Optional[int] = typer.Option(None, "--epochs", help="Override the configured epoch count"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Override the configured seed"),
    workers: int = typer.Option(1, "--workers", help="Parallel volume loaders"),
    log_file: Optional[Path] = typer.Option(None, "--log", help="Also write the log to this file"),
    log_level: str = typer.Option("INFO", "--log-level", help=LOG_LEVEL_HELP),
):
    """Train BoBNet on the train partition, monitoring validation F1 per epoch."""
    bobnet_logger = setup_logging(level=log_level, log_file=log_file)
    logger = get_logger()

    try:
        config = _load_run_config(config_file, epochs=epochs, seed=seed)
        dataset = load_dataset(data)
        names = _parse_names(structures) or dataset.structure_names
        unknown = [name for name in names if name not in dataset.structure_names]
        if unknown:
            raise ValueError(f"unknown structures: {', '.join(unknown)}")

        log_system_info()
        bobnet_logger.log_run_config(config.to_dict())
        hooks = HookFactory.create_manager(config, checkpoint_path=out)
        with make_progress(log_console) as progress:
            result = train_on_dataset(dataset, config, names, hooks, workers=workers, progress=progress)
        save_checkpoint(result.model, out, result.structure_names, config.target_spacing_mm)
    except HANDLED_ERRORS as e:
        _fail(e, "training")

    logger.info(f"Checkpoint written to {out}")
    print_training_summary(result)
    console.print(f"[green]Model saved to {out}[/green]")


@app.command("localize")
def localize_volume(
    model: Path = typer.Option(..., "--model", "-m", help="Checkpoint path"),
    volume: Path = typer.Option(..., "--volume", "-v", help="Volume header (.mhd)"),
    out: Path = typer.Option(..., "--out", "-o", help="Output box file"),
    profiles: Optional[Path] = typer.Option(None, "--profiles", help="Write the detection profile CSV here"),
    show_time: bool = typer.Option(False, "--time", help="Report per-slice inference time"),
    workers: int = typer.Option(1, "--workers", help="Parallel slice predictions"),
    config_file: Optional[Path] = typer.Option(None, "--config", "-c", help="Run configuration file"),
    threshold: Optional[float] = typer.Option(None, "--threshold", help="Override the fusion threshold"),
    log_level: str = typer.Option("WARNING", "--log-level", help=LOG_LEVEL_HELP),
):
    """Localize every structure of a trained model in one volume."""
    setup_logging(level=log_level)
    try:
        config = _load_run_config(config_file, threshold=threshold)
        network, names = load_checkpoint(model)
        image = load_volume(volume)
        result = localize(network, image, names, config.fusion_config(),
                          _inference_spacing(model, config), workers=workers)
        write_boxes(out, result.found.values(), missing=result.missing)
        if profiles:
            write_profile_csv(profiles, result.profile)
    except HANDLED_ERRORS as e:
        _fail(e, "localizing")

    print_localization(result, show_time=show_time)


@app.command("evaluate")
def evaluate(
    pred: Path = typer.Option(..., "--pred", help="Predicted box file"),
    ref: Path = typer.Option(..., "--ref", help="Reference box file"),
    volume: Path = typer.Option(..., "--volume", "-v", help="Volume header (.mhd) giving dims and spacing"),
    csv_out: Optional[Path] = typer.Option(None, "--csv", help="Write the summary CSV here"),
    walls_csv: Optional[Path] = typer.Option(None, "--walls-csv", help="Write per-wall signed distances here"),
    log_level: str = typer.Option("WARNING", "--log-level", help=LOG_LEVEL_HELP),
):
    """Wall and centroid distances of predicted boxes against reference boxes."""
    setup_logging(level=log_level)
    try:
        header = read_volume_header(volume)
        predicted = boxes_by_name(validate_boxes(load_boxes(pred), header))
        reference = validate_boxes(load_boxes(ref), header)

        writer = EvaluationWriter()
        for ref_box in reference:
            auto = predicted.get(ref_box.structure_name)
            if auto is None:
                writer.add_failure(ref_box.structure_name)
            else:
                writer.add_report(localization_report(auto, ref_box))
        if csv_out:
            writer.write_csv(csv_out)
        if walls_csv:
            writer.write_walls_csv(walls_csv)
    except HANDLED_ERRORS as e:
        _fail(e, "evaluating")

    console.print(writer.format_text(), end="", markup=False, highlight=False)


@app.command("compare")
def compare(
    a: Path = typer.Option(..., "--a", help="Prediction CSV of classifier A"),
    b: Path = typer.Option(..., "--b", help="Prediction CSV of classifier B"),
    labels: Path = typer.Option(..., "--labels", help="Label CSV (profile format)"),
    threshold: float = typer.Option(0.5, "--threshold", help="Presence threshold"),
    log_level: str = typer.Option("WARNING", "--log-level", help=LOG_LEVEL_HELP),
):
    """McNemar test between two classifiers' slice predictions."""
    setup_logging(level=log_level)
    try:
        result = compare_predictions(read_profile_csv(a), read_profile_csv(b),
                                     read_profile_csv(labels), threshold)
    except HANDLED_ERRORS as e:
        _fail(e, "comparing predictions")

    print_mcnemar(result)
    console.print(f"b={result.b} c={result.c} statistic={result.statistic:.4f} p={result.p_value:.4f}",
                  markup=False, highlight=False)


@app.command("evaluate-dataset")
def evaluate_dataset(
    data: Path = typer.Option(..., "--data", "-d", help="Dataset directory"),
    model: Path = typer.Option(..., "--model", "-m", help="Checkpoint path"),
    partition: str = typer.Option("test", "--partition", help="Partition to evaluate (train, val, test)"),
    config_file: Optional[Path] = typer.Option(None, "--config", "-c", help="Run configuration file"),
    csv_out: Optional[Path] = typer.Option(None, "--csv", help="Write the summary CSV here"),
    walls_csv: Optional[Path] = typer.Option(None, "--walls-csv", help="Write per-wall signed distances here"),
    json_out: Optional[Path] = typer.Option(None, "--json", help="Write the full report as JSON"),
    workers: int = typer.Option(1, "--workers", help="Parallel slice predictions"),
    log_level: str = typer.Option("WARNING", "--log-level", help=LOG_LEVEL_HELP),
):
    """Localize every volume of a partition and report detection and localization accuracy."""
    setup_logging(level=log_level)
    logger = get_logger()
    try:
        config = _load_run_config(config_file)
        dataset = load_dataset(data)
        network, names = load_checkpoint(model)
        fusion = config.fusion_config()
        spacing = _inference_spacing(model, config)
        volume_ids = dataset.ids(partition)

        writer = EvaluationWriter()
        with make_progress(log_console) as progress:
            task = progress.add_task(f"Localizing {partition}", total=len(volume_ids))
            for volume_id in volume_ids:
                image, boxes = dataset.load_sample(volume_id, names)
                result = localize(network, image, names, fusion, spacing, workers=workers)
                truth = ideal_profile(image.dims, boxes)
                for plane in PLANES:
                    writer.add_detection(plane.value, detection_report(
                        result.profile.plane(plane), truth.plane(plane).astype(bool), fusion.threshold
                    ))
                found = result.found
                for ref_box in boxes:
                    auto = found.get(ref_box.structure_name)
                    if auto is None:
                        writer.add_failure(ref_box.structure_name, volume_id)
                    else:
                        writer.add_report(localization_report(auto, ref_box, volume_id))
                logger.info(f"{volume_id}: {result.slice_count} slices, {result.mean_ms_per_slice:.2f} ms/slice")
                progress.update(task, advance=1)

        if csv_out:
            writer.write_csv(csv_out)
        if walls_csv:
            writer.write_walls_csv(walls_csv)
        if json_out:
            writer.write_json(json_out)
    except HANDLED_ERRORS as e:
        _fail(e, "evaluating dataset")

    print_evaluation(writer, title=f"{partition} partition of {data}")


@app.command("labels")
def labels(
    volume: Path = typer.Option(..., "--volume", "-v", help="Volume header (.mhd)"),
    boxes: Path = typer.Option(..., "--boxes", help="Reference box file"),
    out: Path = typer.Option(..., "--out", "-o", help="Output label CSV"),
    log_level: str = typer.Option("WARNING", "--log-level", help=LOG_LEVEL_HELP),
):
    """Write ideal per-slice presence labels in the profile CSV format."""
    setup_logging(level=log_level)
    try:
        header = read_volume_header(volume)
        reference = validate_boxes(load_boxes(boxes), header)
        write_profile_csv(out, ideal_profile(header.dims, reference))
    except HANDLED_ERRORS as e:
        _fail(e, "writing labels")

    console.print(f"[green]Labels written to {out}[/green]")


@config_app.command("show")
def show_config(
    config_file: Optional[Path] = typer.Option(None, "--config", "-c", help="Path to configuration file"),
):
    """Show current configuration."""
    config_manager = ConfigManager()
    try:
        config_manager.load_config(config_file)
    except HANDLED_ERRORS as e:
        _fail(e, "loading configuration")
    config_manager.print_config()


@config_app.command("create")
def create_config(
    output: Path = typer.Option(Path("bobnet.cfg"), "--output", "-o", help="Output file path (.cfg, .yaml or .toml)"),
):
    """Create a default configuration file."""
    config_manager = ConfigManager()
    try:
        config_manager.create_default_config(output)
    except HANDLED_ERRORS as e:
        _fail(e, "creating configuration")
    console.print(f"[green]Default configuration written to {output}[/green]")


@config_app.command("template")
def show_template():
    """Show configuration template."""
    config_manager = ConfigManager()
    console.print(config_manager.get_config_template(), markup=False, highlight=False)


def cli():
    """Entry point for the CLI."""
    app()


if __name__ == "__main__":
    cli()
