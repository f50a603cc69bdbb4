"""Per-epoch training hooks."""

from .builtin import CheckpointHook, ConsoleLogHook, HistoryFileHook
from .factory import HookFactory
from .manager import Hook, HookManager
from .types import EpochContext, HookResult

__all__ = [
    "CheckpointHook",
    "ConsoleLogHook",
    "HistoryFileHook",
    "HookFactory",
    "Hook",
    "HookManager",
    "EpochContext",
    "HookResult",
]
