"""Exception types for bobnet."""

from typing import Optional


class BobnetError(Exception):
    """Base class for all bobnet errors."""


class FormatError(BobnetError, ValueError):
    """A file does not follow its documented format."""


class VolumeFormatError(FormatError):
    """MetaImage header or raw payload is invalid."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


class BoxFormatError(FormatError):
    """Bounding-box annotation file is invalid."""

    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class CheckpointFormatError(FormatError):
    """Model checkpoint is truncated or has the wrong layout."""


class ProfileFormatError(FormatError):
    """Detection profile CSV is invalid."""


class DatasetError(BobnetError, ValueError):
    """Dataset directory is incomplete or inconsistent."""


class ConfigError(BobnetError, ValueError):
    """Run configuration contains unknown keys or bad values."""


class InvalidStateError(BobnetError, RuntimeError):
    """An operation was called before its prerequisite."""


class TrainingAbortedError(BobnetError, RuntimeError):
    """Training produced a non-finite loss or gradient."""

    def __init__(self, message: str, epoch: int, batch: int):
        self.epoch = epoch
        self.batch = batch
        super().__init__(f"epoch {epoch}, batch {batch}: {message}")


def exit_code_for(error: BaseException) -> int:
    """Map an exception to the CLI exit code (1 validation, 2 I/O or format)."""
    if isinstance(error, (FormatError, OSError)):
        return 2
    return 1
