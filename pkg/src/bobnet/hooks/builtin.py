"""Built-in hooks for common end-of-epoch actions."""

import csv
from pathlib import Path

from bobnet.data.slicing import PLANES

from .manager import Hook
from .types import EpochContext, HookResult

HISTORY_HEADER = (
    ["epoch", "loss", "learning_rate", "validation_f1"]
    + [f"{plane.value}_f1" for plane in PLANES]
    + ["seconds"]
)


class ConsoleLogHook(Hook):
    """Prints one summary line per epoch."""

    def execute(self, context: EpochContext) -> HookResult:
        from bobnet.output.display import print_epoch_summary

        print_epoch_summary(context)
        return HookResult(success=True, message=f"Logged epoch {context.epoch}")


class HistoryFileHook(Hook):
    """Writes the training curve to a CSV file, one row per epoch."""

    def execute(self, context: EpochContext) -> HookResult:
        try:
            file_path = Path(self.config["file_path"])
            first = context.epoch == 1 or not file_path.exists()
            file_path.parent.mkdir(parents=True, exist_ok=True)

            with open(file_path, "w" if first else "a", newline="", encoding="utf-8") as f:
                writer = csv.writer(f, lineterminator="\n")
                if first:
                    writer.writerow(HISTORY_HEADER)
                writer.writerow(
                    [context.epoch, f"{context.loss:.6f}", f"{context.learning_rate:.6g}",
                     f"{context.validation_f1:.6f}"]
                    + [f"{context.plane_f1.get(plane.value, 0.0):.6f}" for plane in PLANES]
                    + [f"{context.seconds:.3f}"]
                )

            return HookResult(success=True, message=f"Appended to {file_path}",
                              data={"file_path": str(file_path)})

        except (KeyError, OSError) as e:
            return HookResult(success=False, error=f"Failed to write history: {e}")


class CheckpointHook(Hook):
    """Saves an intermediate checkpoint every ``every`` epochs.

    The final epoch is skipped since the trainer writes the final checkpoint
    itself.
    """

    def snapshot_path(self, epoch: int) -> Path:
        path = Path(self.config["path"])
        return path.with_name(f"{path.stem}.epoch{epoch:03d}{path.suffix}")

    def execute(self, context: EpochContext) -> HookResult:
        from bobnet.model.checkpoint import save_checkpoint

        every = int(self.config.get("every", 0))
        if every <= 0 or context.epoch % every or context.epoch == context.epochs:
            return HookResult(success=True)
        try:
            target = self.snapshot_path(context.epoch)
            save_checkpoint(context.model, target, context.structure_names,
                            self.config.get("target_spacing_mm"))
            return HookResult(success=True, message=f"Snapshot written to {target}",
                              data={"path": str(target)})
        except (KeyError, OSError, ValueError) as e:
            return HookResult(success=False, error=f"Failed to write snapshot: {e}")
