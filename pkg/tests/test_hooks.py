"""Tests for the per-epoch hook system."""

import csv

import pytest

from bobnet.evaluation.metrics import DetectionReport
from bobnet.hooks import (
    CheckpointHook,
    EpochContext,
    Hook,
    HookFactory,
    HookManager,
    HookResult,
    HistoryFileHook,
)
from bobnet.model.checkpoint import load_checkpoint, load_training_spacing
from bobnet.utils.config import RunConfig


def make_context(model, epoch=1, epochs=3):
    return EpochContext(
        epoch=epoch,
        epochs=epochs,
        loss=0.5 / epoch,
        learning_rate=0.01,
        validation=DetectionReport(3, 1, 1, 5),
        plane_f1={"sagittal": 0.7, "coronal": 0.8, "axial": 0.9},
        seconds=1.25,
        model=model,
        structure_names=["heart", "aorta"],
    )


class ExplodingHook(Hook):
    def execute(self, context):
        raise RuntimeError("boom")


class RecordingHook(Hook):
    def __init__(self, name, config=None):
        super().__init__(name, config)
        self.epochs = []

    def execute(self, context):
        self.epochs.append(context.epoch)
        return HookResult(success=True)


def test_failing_hook_does_not_stop_others(tiny_model):
    manager = HookManager()
    recorder = RecordingHook("recorder")
    manager.register_hook(ExplodingHook("exploding"))
    manager.register_hook(recorder)
    results = manager.execute_hooks(make_context(tiny_model))
    assert [r.success for r in results] == [False, True]
    assert "boom" in results[0].error
    assert recorder.epochs == [1]


def test_disabled_hook_is_skipped(tiny_model):
    manager = HookManager()
    recorder = RecordingHook("recorder", {"enabled": False})
    manager.register_hook(recorder)
    assert manager.execute_hooks(make_context(tiny_model)) == []


def test_history_file(tmp_path, tiny_model):
    path = tmp_path / "logs" / "history.csv"
    hook = HistoryFileHook("history", {"file_path": str(path)})
    for epoch in (1, 2):
        assert hook.execute(make_context(tiny_model, epoch)).success
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    assert [r["epoch"] for r in rows] == ["1", "2"]
    assert float(rows[0]["validation_f1"]) == pytest.approx(0.75)
    assert float(rows[1]["axial_f1"]) == pytest.approx(0.9)

    # a new run truncates the file
    hook.execute(make_context(tiny_model, 1))
    assert len(path.read_text(encoding="utf-8").splitlines()) == 2


def test_checkpoint_hook_snapshots(tmp_path, tiny_model):
    hook = CheckpointHook("snapshots", {"path": str(tmp_path / "model.bobn"), "every": 2,
                                       "target_spacing_mm": 2.5})
    for epoch in range(1, 5):
        hook.execute(make_context(tiny_model, epoch, epochs=4))
    assert (tmp_path / "model.epoch002.bobn").exists()
    assert not (tmp_path / "model.epoch001.bobn").exists()
    # the final epoch is left to the trainer
    assert not (tmp_path / "model.epoch004.bobn").exists()
    _, names = load_checkpoint(tmp_path / "model.epoch002.bobn")
    assert names == ["heart", "aorta"]
    assert load_training_spacing(tmp_path / "model.epoch002.bobn") == 2.5


def test_factory_builds_hooks_from_run_config(tmp_path):
    config = RunConfig(history_csv=str(tmp_path / "h.csv"), snapshot_every=5)
    manager = HookFactory.create_manager(config, checkpoint_path=tmp_path / "m.bobn", console=False)
    assert [type(h).__name__ for h in manager.hooks] == ["HistoryFileHook", "CheckpointHook"]
    assert HookFactory.create_manager(RunConfig()).hooks[0].name == "console_log_hook"


def test_factory_rejects_unknown_type():
    with pytest.raises(ValueError, match="Unknown hook type"):
        HookFactory.create_hook({"type": "webhook"})
    assert HookFactory.create_hook({"type": "console_log", "enabled": False}) is None
    assert set(HookFactory.get_available_hook_types()) == {"console_log", "history_csv", "checkpoint"}
