"""Model training."""

from .trainer import EpochRecord, Trainer, TrainingResult, evaluate_slices, predict_slices, train_on_dataset

__all__ = [
    "EpochRecord",
    "Trainer",
    "TrainingResult",
    "evaluate_slices",
    "predict_slices",
    "train_on_dataset",
]
