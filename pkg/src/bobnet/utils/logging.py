"""Logging configuration for bobnet."""

import logging
import platform
import sys
from pathlib import Path
from typing import Any, Dict, Optional

from rich.console import Console
from rich.logging import RichHandler
from rich.traceback import install as install_rich_traceback

from bobnet.utils.errors import (
    BoxFormatError,
    TrainingAbortedError,
    VolumeFormatError,
    exit_code_for,
)

install_rich_traceback(show_locals=False)

console = Console(stderr=True)

LOGGER_NAME = "bobnet"
PLAIN_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
FILE_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s"


class BobnetLogger:
    """Owns the handlers of the ``bobnet`` logger namespace."""

    def __init__(self, level: str = "INFO", log_file: Optional[Path] = None,
                 enable_rich: bool = True):
        self.level = level.upper()
        self.log_file = log_file
        self.enable_rich = enable_rich
        self.logger = logging.getLogger(LOGGER_NAME)
        self._install_handlers()

    def _install_handlers(self) -> None:
        level = logging.getLevelName(self.level)
        if not isinstance(level, int):
            raise ValueError(f"unknown log level {self.level!r}")
        self.logger.setLevel(level)
        self.logger.propagate = False

        for handler in list(self.logger.handlers):
            handler.close()
        self.logger.handlers.clear()

        self.logger.addHandler(self._console_handler())
        if self.log_file:
            try:
                self.logger.addHandler(self._file_handler(self.log_file))
            except OSError as e:
                self.logger.warning(f"Could not open log file {self.log_file}: {e}")

    def _console_handler(self) -> logging.Handler:
        if self.enable_rich:
            handler: logging.Handler = RichHandler(
                console=console,
                show_time=True,
                show_path=False,
                rich_tracebacks=True,
                markup=False,
            )
            handler.setFormatter(logging.Formatter("%(message)s"))
        else:
            handler = logging.StreamHandler(sys.stderr)
            handler.setFormatter(logging.Formatter(PLAIN_FORMAT))
        return handler

    @staticmethod
    def _file_handler(path: Path) -> logging.Handler:
        path.parent.mkdir(parents=True, exist_ok=True)
        handler = logging.FileHandler(path, mode="a", encoding="utf-8")
        handler.setFormatter(logging.Formatter(FILE_FORMAT))
        return handler

    def log_system_info(self) -> None:
        """Log the numeric stack and the resources a CPU training run can use."""
        import numpy as np
        import psutil
        import scipy

        memory = psutil.virtual_memory()
        self.logger.info(f"Platform: {platform.system()} {platform.release()}, Python {platform.python_version()}")
        self.logger.info(f"numpy {np.__version__}, scipy {scipy.__version__}")
        self.logger.info(
            f"CPU: {psutil.cpu_count(logical=False) or '?'} physical / {psutil.cpu_count()} logical cores"
        )
        self.logger.info(
            f"Memory: {memory.available / 1024**3:.1f} of {memory.total / 1024**3:.1f} GB available"
        )

    def log_run_config(self, settings: Dict[str, Any]) -> None:
        """Log the effective run configuration on a single line."""
        self.logger.info("Run configuration: " + ", ".join(f"{k}={v}" for k, v in settings.items()))


_logger_instance: Optional[BobnetLogger] = None


def get_logger() -> logging.Logger:
    """Return the ``bobnet`` logger, creating a WARNING-level console setup on first use."""
    global _logger_instance
    if _logger_instance is None:
        _logger_instance = BobnetLogger(level="WARNING")
    return _logger_instance.logger


def setup_logging(level: str = "INFO", log_file: Optional[Path] = None,
                  enable_rich: bool = True) -> BobnetLogger:
    """(Re)configure the ``bobnet`` logger; called once per CLI command."""
    global _logger_instance, _error_handler
    _logger_instance = BobnetLogger(level=level, log_file=log_file, enable_rich=enable_rich)
    _error_handler = None
    return _logger_instance


def log_system_info() -> None:
    get_logger()
    assert _logger_instance is not None
    _logger_instance.log_system_info()


def log_exception(logger: logging.Logger, exception: BaseException, context: str = "") -> None:
    """Log an exception on one line, with the traceback at DEBUG."""
    prefix = f"{context} failed" if context else "Failed"
    logger.error(f"{prefix}: {type(exception).__name__}: {exception}")
    logger.debug("Traceback:", exc_info=exception)


def log_performance(logger: logging.Logger, operation: str, duration: float,
                    additional_info: Optional[Dict[str, Any]] = None) -> None:
    """Log how long ``operation`` took, with optional ``key=value`` details."""
    message = f"Performance: {operation} took {duration:.3f}s"
    if additional_info:
        message += " (" + ", ".join(f"{k}={v}" for k, v in additional_info.items()) + ")"
    logger.info(message)


def _hint_for(error: BaseException) -> Optional[str]:
    if isinstance(error, VolumeFormatError):
        return f"check the {error.key} entry of the MetaImage header"
    if isinstance(error, BoxFormatError) and error.line_number is not None:
        return "box lines read: name x_lo x_hi y_lo y_hi z_lo z_hi"
    if isinstance(error, TrainingAbortedError):
        return "lower base_lr or check the inputs for NaN voxels"
    return None


class ErrorHandler:
    """Reports CLI errors to the log and the console and picks the exit code."""

    def __init__(self, logger: logging.Logger):
        self.logger = logger
        self.error_count = 0

    def handle_error(self, error: BaseException, context: str = "") -> int:
        self.error_count += 1
        log_exception(self.logger, error, context)

        code = exit_code_for(error)
        label = "Invalid input" if code == 1 else "File error"
        console.print(f"[red]{label}: {error}[/red]")
        hint = _hint_for(error)
        if hint:
            console.print(f"[dim]Hint: {hint}[/dim]")
        return code


_error_handler: Optional[ErrorHandler] = None


def get_error_handler() -> ErrorHandler:
    global _error_handler
    if _error_handler is None:
        _error_handler = ErrorHandler(get_logger())
    return _error_handler
