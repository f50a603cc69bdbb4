"""Hook factory for creating hooks from configuration."""

from pathlib import Path
from typing import Any, Dict, List, Optional, Type

from bobnet.utils.config import RunConfig

from .builtin import CheckpointHook, ConsoleLogHook, HistoryFileHook
from .manager import Hook, HookManager


class HookFactory:
    """Factory for creating hooks from configuration."""

    HOOK_TYPES: Dict[str, Type[Hook]] = {
        "console_log": ConsoleLogHook,
        "history_csv": HistoryFileHook,
        "checkpoint": CheckpointHook,
    }

    @classmethod
    def create_hook(cls, hook_config: Dict[str, Any]) -> Optional[Hook]:
        """Create a hook from a ``{type, name, enabled, config}`` mapping."""
        hook_type = hook_config.get("type")
        if not hook_type:
            raise ValueError("Hook configuration missing 'type' field")

        hook_class = cls.HOOK_TYPES.get(hook_type)
        if not hook_class:
            raise ValueError(f"Unknown hook type: {hook_type}")

        if not hook_config.get("enabled", True):
            return None

        return hook_class(name=hook_config.get("name", f"{hook_type}_hook"),
                          config=hook_config.get("config", {}))

    @classmethod
    def hook_configs_for_run(cls, config: RunConfig, checkpoint_path: Optional[Path],
                             console: bool = True) -> List[Dict[str, Any]]:
        """Hook settings implied by a run configuration."""
        configs: List[Dict[str, Any]] = []
        if console:
            configs.append({"type": "console_log"})
        if config.history_csv:
            configs.append({"type": "history_csv", "config": {"file_path": config.history_csv}})
        if config.snapshot_every and checkpoint_path is not None:
            configs.append({
                "type": "checkpoint",
                "config": {"path": str(checkpoint_path), "every": config.snapshot_every,
                           "target_spacing_mm": config.target_spacing_mm},
            })
        return configs

    @classmethod
    def create_manager(cls, config: RunConfig, checkpoint_path: Optional[Path] = None,
                       console: bool = True) -> HookManager:
        """HookManager with every hook the run configuration asks for."""
        manager = HookManager()
        for hook_config in cls.hook_configs_for_run(config, checkpoint_path, console):
            hook = cls.create_hook(hook_config)
            if hook:
                manager.register_hook(hook)
        return manager

    @classmethod
    def get_available_hook_types(cls) -> List[str]:
        """Get list of available hook types."""
        return list(cls.HOOK_TYPES.keys())
