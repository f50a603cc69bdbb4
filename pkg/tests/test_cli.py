"""Tests for the bobnet command line."""

import json

import numpy as np
import pytest
from typer.testing import CliRunner

from bobnet.imaging.boxes import BBox3D, load_boxes, write_boxes
from bobnet.imaging.volume import Volume3D, write_volume
from bobnet.localization.fusion import ProfileRow, localize, read_profile_csv, write_profile_rows
from bobnet.main import app
from bobnet.model.checkpoint import save_checkpoint

runner = CliRunner()

QUICK_CONFIG = """epochs=1
batch_size=32
min_input=64
channel_scale=1/8
max_rotation_deg=0
seed=2
"""


@pytest.fixture
def scan(tmp_path):
    """12x10x8 volume at (1.5, 1.5, 2.0) mm with a reference box file."""
    header, _ = write_volume(
        Volume3D(np.zeros((12, 10, 8), np.float32), (1.5, 1.5, 2.0)), tmp_path / "scan.mhd"
    )
    ref = tmp_path / "ref.txt"
    write_boxes(ref, [BBox3D("heart", (2, 1, 0), (8, 6, 5)), BBox3D("aorta", (4, 4, 2), (5, 5, 7))])
    return header, ref


def test_gen_synth_needs_ten_volumes(tmp_path):
    result = runner.invoke(app, ["gen-synth", "--out", str(tmp_path / "d"), "--count", "5"])
    assert result.exit_code == 1


def test_gen_synth_is_reproducible(tmp_path):
    args = ["--count", "10", "--seed", "1", "--dims", "24,24,24", "--spacing", "2.0,2.0,2.0"]
    first = runner.invoke(app, ["gen-synth", "--out", str(tmp_path / "a")] + args)
    second = runner.invoke(app, ["gen-synth", "--out", str(tmp_path / "b")] + args)
    assert first.exit_code == 0, first.output
    assert second.exit_code == 0
    assert len([p for p in (tmp_path / "a").iterdir() if p.is_dir()]) == 10
    for name in ("split.txt", "phantom_007/volume.raw", "phantom_007/boxes.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_gen_synth_rejects_bad_spacing(tmp_path):
    result = runner.invoke(app, ["gen-synth", "--out", str(tmp_path / "d"), "--spacing", "1,1"])
    assert result.exit_code == 1


def test_labels(tmp_path, scan):
    header, ref = scan
    out = tmp_path / "labels.csv"
    result = runner.invoke(app, ["labels", "--volume", str(header), "--boxes", str(ref), "--out", str(out)])
    assert result.exit_code == 0, result.output
    rows = read_profile_csv(out)
    assert len(rows) == (12 + 10 + 8) * 2
    present = {r.slice_index for r in rows if r.plane == "axial" and r.structure == "heart" and r.probability == 1}
    assert present == set(range(0, 6))


def test_evaluate_identical_boxes(tmp_path, scan):
    header, ref = scan
    csv_out = tmp_path / "summary.csv"
    result = runner.invoke(app, ["evaluate", "--pred", str(ref), "--ref", str(ref),
                                 "--volume", str(header), "--csv", str(csv_out)])
    assert result.exit_code == 0, result.output
    lines = csv_out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "structure,wall_mean_mm,wall_std_mm,centroid_mean_mm,centroid_std_mm"
    assert lines[1] == "heart,0.000000,0.000000,0.000000,0.000000"


def test_evaluate_worked_wall_example(tmp_path, scan):
    header, _ = scan
    pred, ref = tmp_path / "pred.txt", tmp_path / "ref.txt"
    write_boxes(pred, [BBox3D("heart", (3, 0, 0), (11, 5, 5))])
    write_boxes(ref, [BBox3D("heart", (4, 0, 0), (10, 5, 5))])
    walls = tmp_path / "walls.csv"
    result = runner.invoke(app, ["evaluate", "--pred", str(pred), "--ref", str(ref),
                                 "--volume", str(header), "--walls-csv", str(walls)])
    assert result.exit_code == 0, result.output
    lines = walls.read_text(encoding="utf-8").splitlines()
    assert "heart,,x_lo,1.500000" in lines
    assert "heart,,x_hi,1.500000" in lines
    assert "heart,,z_hi,0.000000" in lines


def test_evaluate_missing_prediction_is_reported(tmp_path, scan):
    header, ref = scan
    pred = tmp_path / "pred.txt"
    write_boxes(pred, [BBox3D("heart", (2, 1, 0), (8, 6, 5))], missing=["aorta"])
    result = runner.invoke(app, ["evaluate", "--pred", str(pred), "--ref", str(ref), "--volume", str(header)])
    assert result.exit_code == 0
    assert "aorta: localization failed" in result.output


def test_evaluate_malformed_box_file_exits_2(tmp_path, scan):
    header, ref = scan
    pred = tmp_path / "pred.txt"
    pred.write_text("heart 1 2 3\n", encoding="utf-8")
    result = runner.invoke(app, ["evaluate", "--pred", str(pred), "--ref", str(ref), "--volume", str(header)])
    assert result.exit_code == 2
    assert "name x_lo x_hi y_lo y_hi z_lo z_hi" in result.output


def test_compare(tmp_path):
    def write(name, probabilities):
        path = tmp_path / name
        write_profile_rows(path, [ProfileRow("axial", i, "heart", p) for i, p in enumerate(probabilities)])
        return path

    labels = write("labels.csv", [1.0] * 12 + [0.0] * 5)
    a = write("a.csv", [0.9] * 10 + [0.1] * 2 + [0.2] * 5)
    b = write("b.csv", [0.1] * 10 + [0.9] * 2 + [0.3] * 5)
    result = runner.invoke(app, ["compare", "--a", str(a), "--b", str(b), "--labels", str(labels)])
    assert result.exit_code == 0, result.output
    assert "b=10 c=2 statistic=4.0833 p=0.0433" in result.output

    same = runner.invoke(app, ["compare", "--a", str(a), "--b", str(a), "--labels", str(labels)])
    assert "p=1.0000" in same.output


def test_compare_without_shared_keys(tmp_path):
    a = tmp_path / "a.csv"
    write_profile_rows(a, [ProfileRow("axial", 0, "heart", 0.5)])
    labels = tmp_path / "labels.csv"
    write_profile_rows(labels, [ProfileRow("coronal", 0, "heart", 1.0)])
    result = runner.invoke(app, ["compare", "--a", str(a), "--b", str(a), "--labels", str(labels)])
    assert result.exit_code == 1


def test_localize_writes_boxes_and_profiles(tmp_path, tiny_model):
    model_path = tmp_path / "model.bobn"
    save_checkpoint(tiny_model, model_path, ["heart", "aorta"])
    header, _ = write_volume(
        Volume3D(np.random.default_rng(0).normal(0, 200, (9, 10, 11)).astype(np.float32), (1.5, 1.5, 1.5)),
        tmp_path / "scan.mhd",
    )
    out, profiles = tmp_path / "pred.txt", tmp_path / "profile.csv"
    result = runner.invoke(app, ["localize", "--model", str(model_path), "--volume", str(header),
                                 "--out", str(out), "--profiles", str(profiles), "--time"])
    assert result.exit_code == 0, result.output
    assert len(read_profile_csv(profiles)) == (9 + 10 + 11) * 2
    found = {box.structure_name for box in load_boxes(out)}
    comments = [line for line in out.read_text(encoding="utf-8").splitlines() if line.startswith("#")]
    assert len(found) + len(comments) == 2


def test_localize_uses_training_spacing(tmp_path, tiny_model, monkeypatch):
    spacings = []

    def recording_localize(model, volume, names, config, target_mm, workers=1):
        spacings.append(target_mm)
        return localize(model, volume, names, config, target_mm, workers=workers)

    monkeypatch.setattr("bobnet.main.localize", recording_localize)
    model_path = tmp_path / "model.bobn"
    save_checkpoint(tiny_model, model_path, ["heart", "aorta"], target_spacing_mm=3.0)
    header, _ = write_volume(Volume3D(np.zeros((9, 10, 11), np.float32), (1.5, 1.5, 1.5)),
                             tmp_path / "scan.mhd")
    config = tmp_path / "run.cfg"
    config.write_text("target_spacing_mm=1.5\n", encoding="utf-8")

    result = runner.invoke(app, ["localize", "--model", str(model_path), "--volume", str(header),
                                 "--out", str(tmp_path / "pred.txt"), "--config", str(config)])
    assert result.exit_code == 0, result.output
    assert spacings == [3.0]

    model_path.with_name("model.bobn.spacing").unlink()
    runner.invoke(app, ["localize", "--model", str(model_path), "--volume", str(header),
                        "--out", str(tmp_path / "pred.txt"), "--config", str(config)])
    assert spacings == [3.0, 1.5]


def test_localize_missing_model_exits_2(tmp_path, scan):
    header, _ = scan
    result = runner.invoke(app, ["localize", "--model", str(tmp_path / "none.bobn"),
                                 "--volume", str(header), "--out", str(tmp_path / "o.txt")])
    assert result.exit_code == 2


def test_train_reports_volume_without_boxes(small_dataset, tmp_path):
    (small_dataset / "phantom_002" / "boxes.txt").unlink()
    result = runner.invoke(app, ["train", "--data", str(small_dataset), "--out", str(tmp_path / "m.bobn")])
    assert result.exit_code == 1
    assert "phantom_002" in result.output


@pytest.mark.integration
def test_train_then_evaluate_dataset(small_dataset, tmp_path):
    config = tmp_path / "quick.cfg"
    config.write_text(QUICK_CONFIG + f"history_csv={tmp_path / 'history.csv'}\n", encoding="utf-8")
    model_path = tmp_path / "model.bobn"

    trained = runner.invoke(app, ["train", "--data", str(small_dataset), "--out", str(model_path),
                                  "--config", str(config), "--log-level", "WARNING"])
    assert trained.exit_code == 0, trained.output
    assert model_path.exists()
    assert (tmp_path / "model.bobn.names").read_text(encoding="utf-8").split() == ["heart", "aorta"]
    assert (tmp_path / "model.bobn.spacing").read_text(encoding="utf-8").strip() == "1.5"
    assert len((tmp_path / "history.csv").read_text(encoding="utf-8").splitlines()) == 2

    report = tmp_path / "report.json"
    evaluated = runner.invoke(app, ["evaluate-dataset", "--data", str(small_dataset), "--model", str(model_path),
                                    "--config", str(config), "--json", str(report)])
    assert evaluated.exit_code == 0, evaluated.output
    data = json.loads(report.read_text(encoding="utf-8"))
    assert set(data["detection"]) == {"sagittal", "coronal", "axial"}
    located = len(data["reports"]) + len(data["failures"])
    assert located == 5 * 2


def test_config_template_and_create(tmp_path):
    template = runner.invoke(app, ["config", "template"])
    assert template.exit_code == 0
    assert "target_spacing_mm=1.5" in template.output

    path = tmp_path / "bobnet.yaml"
    created = runner.invoke(app, ["config", "create", "--output", str(path)])
    assert created.exit_code == 0
    shown = runner.invoke(app, ["config", "show", "--config", str(path)])
    assert shown.exit_code == 0
    assert "epochs: 30" in shown.output


def test_config_show_rejects_unknown_key(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("learning_rate=1\n", encoding="utf-8")
    assert runner.invoke(app, ["config", "show", "--config", str(path)]).exit_code == 1
