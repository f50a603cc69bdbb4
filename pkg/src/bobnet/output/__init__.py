"""Terminal and file output."""

from .file_writer import EvaluationWriter, LocalizationFailure

__all__ = ["EvaluationWriter", "LocalizationFailure"]
