"""Training loop for BoBNet on labeled slices of all three planes."""

import time
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from rich.progress import Progress, TaskID

from bobnet.data.batching import make_minibatch
from bobnet.data.dataset import Dataset, load_labeled_slices
from bobnet.data.slicing import PLANES, LabeledSlice, pad_to_minimum, rotate_augment
from bobnet.evaluation.metrics import DetectionReport, detection_report
from bobnet.hooks.manager import HookManager
from bobnet.hooks.types import EpochContext
from bobnet.model.bobnet import BoBNet, build_bobnet, loss_and_gradients
from bobnet.nn.layers import Dropout
from bobnet.nn.optimizer import NonFiniteGradientError, learning_rate, nesterov_step
from bobnet.utils.config import RunConfig
from bobnet.utils.errors import TrainingAbortedError
from bobnet.utils.logging import get_logger, log_performance

logger = get_logger()


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    learning_rate: float
    validation_f1: float
    plane_f1: Dict[str, float]
    seconds: float


@dataclass
class TrainingResult:
    model: BoBNet
    structure_names: List[str]
    history: List[EpochRecord] = field(default_factory=list)

    @property
    def validation_curve(self) -> List[float]:
        return [record.validation_f1 for record in self.history]


def predict_slices(model: BoBNet, slices: Sequence[LabeledSlice], batch_size: int = 64) -> np.ndarray:
    """Presence probabilities ``(len(slices), N)`` at native size (padded to 64).

    Slices of equal padded shape share a batch; rows keep input order.
    """
    probs = np.zeros((len(slices), model.num_structures), dtype=np.float64)
    groups: Dict[Tuple[int, int], List[int]] = defaultdict(list)
    padded = [pad_to_minimum(item.slice.pixels) for item in slices]
    for index, pixels in enumerate(padded):
        groups[pixels.shape].append(index)

    for indices in groups.values():
        for start in range(0, len(indices), batch_size):
            chunk = indices[start:start + batch_size]
            batch = np.stack([padded[i] for i in chunk])[:, np.newaxis]
            probs[chunk] = model.predict_batch(batch)
    return probs


def evaluate_slices(model: BoBNet, slices: Sequence[LabeledSlice], threshold: float = 0.5,
                    batch_size: int = 64) -> Tuple[DetectionReport, Dict[str, DetectionReport]]:
    """Slice-level detection counts, overall and per plane."""
    per_plane = {plane.value: DetectionReport() for plane in PLANES}
    if not slices:
        return DetectionReport(), per_plane
    probs = predict_slices(model, slices, batch_size)
    labels = np.stack([item.label.as_array() for item in slices])
    planes = np.array([item.slice.plane.value for item in slices])
    for plane in PLANES:
        selected = planes == plane.value
        if selected.any():
            per_plane[plane.value] = detection_report(probs[selected], labels[selected], threshold)
    overall = DetectionReport()
    for report in per_plane.values():
        overall = overall + report
    return overall, per_plane


class Trainer:
    """Nesterov SGD over shuffled, augmented, variable-size minibatches.

    Initialization, data order and augmentation, and dropout masks draw from
    three streams spawned from ``config.seed``, so a seed fixes the run.
    """

    def __init__(self, config: RunConfig, structure_names: Sequence[str],
                 hooks: Optional[HookManager] = None, dtype: type = np.float32,
                 progress: Optional[Progress] = None):
        if not structure_names:
            raise ValueError("at least one structure is required for training")
        self.config = config
        self.structure_names = list(structure_names)
        self.hooks = hooks or HookManager()
        self.dtype = dtype
        self.progress = progress
        self.optimizer = config.optimizer_config()

        init_seq, data_seq, dropout_seq = np.random.SeedSequence(config.seed).spawn(3)
        self.init_rng = np.random.default_rng(init_seq)
        self.data_rng = np.random.default_rng(data_seq)
        self.dropout_rng = np.random.default_rng(dropout_seq)

    def build_model(self) -> BoBNet:
        model = build_bobnet(len(self.structure_names), self.config.scale, rng=self.init_rng,
                             dtype=self.dtype, dropout_rate=self.config.dropout)
        for layer in model.layers:
            if isinstance(layer, Dropout):
                layer.rng = self.dropout_rng
        return model

    def _augment(self, items: Sequence[LabeledSlice]) -> List[LabeledSlice]:
        if self.config.max_rotation_deg <= 0:
            return list(items)
        return [
            LabeledSlice(rotate_augment(item.slice, self.data_rng, self.config.max_rotation_deg), item.label)
            for item in items
        ]

    def _add_task(self, description: str, total: int) -> Optional[TaskID]:
        return self.progress.add_task(description, total=total) if self.progress is not None else None

    def _advance(self, task: Optional[TaskID]) -> None:
        if self.progress is not None and task is not None:
            self.progress.update(task, advance=1)

    def train_epoch(self, model: BoBNet, slices: Sequence[LabeledSlice], epoch: int) -> float:
        """One pass over ``slices``; returns the mean batch loss.

        Raises:
            TrainingAbortedError: a loss or gradient is not finite.
        """
        lr = learning_rate(self.optimizer, epoch)
        batch_size = self.config.batch_size
        order = self.data_rng.permutation(len(slices))
        losses = []
        task = self._add_task(f"epoch {epoch}", -(-len(slices) // batch_size))

        for batch_index, start in enumerate(range(0, len(slices), batch_size), 1):
            items = self._augment([slices[i] for i in order[start:start + batch_size]])
            batch, labels, _ = make_minibatch(items, self.data_rng, self.config.min_input)
            loss, gradients = loss_and_gradients(model, batch, labels, self.config.l2, training=True)
            if not np.isfinite(loss):
                raise TrainingAbortedError(f"non-finite loss {loss}", epoch, batch_index)
            flat = [g for pair in gradients for g in pair]
            try:
                nesterov_step(model.parameters.tensors(), model.parameters.velocities(), flat,
                              lr, self.config.momentum)
            except NonFiniteGradientError as e:
                raise TrainingAbortedError(str(e), epoch, batch_index) from e
            losses.append(loss)
            logger.debug(f"epoch {epoch} batch {batch_index}: loss {loss:.4f} size {batch.shape[2:]}")
            self._advance(task)

        if self.progress is not None and task is not None:
            self.progress.remove_task(task)
        model.clear()
        return float(np.mean(losses))

    def train(self, train_slices: Sequence[LabeledSlice],
              val_slices: Sequence[LabeledSlice]) -> TrainingResult:
        """Run all epochs, monitoring validation F1 after each one."""
        if not train_slices:
            raise ValueError("no training slices")
        model = self.build_model()
        result = TrainingResult(model, self.structure_names)
        logger.info(
            f"Training {model.parameter_count()} parameters on {len(train_slices)} slices "
            f"({len(val_slices)} validation) for {self.config.epochs} epochs"
        )
        epochs_task = self._add_task("Training", self.config.epochs)

        for epoch in range(1, self.config.epochs + 1):
            start = time.perf_counter()
            loss = self.train_epoch(model, train_slices, epoch)
            validation, per_plane = evaluate_slices(model, val_slices, self.config.threshold,
                                                    self.config.batch_size)
            seconds = time.perf_counter() - start

            record = EpochRecord(
                epoch=epoch,
                loss=loss,
                learning_rate=learning_rate(self.optimizer, epoch),
                validation_f1=validation.f1,
                plane_f1={name: report.f1 for name, report in per_plane.items()},
                seconds=seconds,
            )
            result.history.append(record)
            logger.info(
                f"epoch {epoch}/{self.config.epochs} loss {loss:.4f} lr {record.learning_rate:.2g} "
                f"val F1 {validation.f1:.4f}"
            )
            log_performance(logger, f"epoch {epoch}", seconds)

            self.hooks.execute_hooks(EpochContext(
                epoch=epoch,
                epochs=self.config.epochs,
                loss=loss,
                learning_rate=record.learning_rate,
                validation=validation,
                plane_f1=record.plane_f1,
                seconds=seconds,
                model=model,
                structure_names=self.structure_names,
            ))
            self._advance(epochs_task)

        return result


def train_on_dataset(dataset: Dataset, config: RunConfig,
                     structure_names: Optional[Sequence[str]] = None,
                     hooks: Optional[HookManager] = None, workers: int = 1,
                     progress: Optional[Progress] = None) -> TrainingResult:
    """Prepare the train and validation partitions and train on them."""
    names = list(structure_names or dataset.structure_names)
    train_slices = load_labeled_slices(dataset, dataset.ids("train"), config.target_spacing_mm,
                                       names, workers)
    val_slices = load_labeled_slices(dataset, dataset.ids("val"), config.target_spacing_mm,
                                     names, workers)
    return Trainer(config, names, hooks, progress=progress).train(train_slices, val_slices)
