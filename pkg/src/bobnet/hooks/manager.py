"""Hook manager for per-epoch training actions."""

import time
from abc import ABC, abstractmethod
from typing import Any, Dict, List, Optional

from bobnet.utils.logging import get_logger

from .types import EpochContext, HookResult


class Hook(ABC):
    """Abstract base class for hooks."""

    def __init__(self, name: str, config: Optional[Dict[str, Any]] = None):
        self.name = name
        self.config = config or {}
        self.logger = get_logger()

    @abstractmethod
    def execute(self, context: EpochContext) -> HookResult:
        """Execute the hook with the given context."""

    def is_enabled(self) -> bool:
        """Check if the hook is enabled."""
        return bool(self.config.get("enabled", True))


class HookManager:
    """Runs registered hooks after every training epoch."""

    def __init__(self) -> None:
        self.hooks: List[Hook] = []
        self.logger = get_logger()

    def register_hook(self, hook: Hook) -> None:
        """Register a hook to be executed."""
        self.hooks.append(hook)
        self.logger.debug(f"Registered hook: {hook.name}")

    def execute_hooks(self, context: EpochContext) -> List[HookResult]:
        """Execute all enabled hooks; a failing hook never stops training."""
        results = []

        for hook in self.hooks:
            if not hook.is_enabled():
                continue

            try:
                start_time = time.perf_counter()
                result = hook.execute(context)
                execution_time = time.perf_counter() - start_time

                if result.success:
                    self.logger.debug(f"Hook '{hook.name}' executed in {execution_time:.3f}s")
                    if result.message:
                        self.logger.debug(f"Hook '{hook.name}': {result.message}")
                else:
                    self.logger.warning(f"Hook '{hook.name}' failed: {result.error}")

                results.append(result)

            except Exception as e:
                results.append(HookResult(
                    success=False,
                    error=f"Hook '{hook.name}' raised exception: {e}",
                ))
                self.logger.error(f"Hook '{hook.name}' raised exception: {e}")

        return results
