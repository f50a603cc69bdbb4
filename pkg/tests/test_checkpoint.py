"""Tests for the BOBN checkpoint format."""

import io
import struct

import numpy as np
import pytest

from bobnet.model.bobnet import build_bobnet
from bobnet.model.checkpoint import (
    FORMAT_VERSION,
    MAGIC,
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    load_training_spacing,
    names_path,
    save_checkpoint,
    spacing_path,
)
from bobnet.utils.errors import CheckpointFormatError


def test_header_layout(tiny_model):
    data = encode_checkpoint(tiny_model)
    assert data[:4] == MAGIC
    version, n, num, den, layers = struct.unpack("<5I", data[4:24])
    assert (version, n, num, den, layers) == (FORMAT_VERSION, 2, 1, 8, 11)
    rank, out_channels, in_channels, kh, kw = struct.unpack("<5I", data[24:44])
    assert (rank, out_channels, in_channels, kh, kw) == (4, 2, 1, 3, 3)


def test_round_trip_is_bit_exact(tiny_model, tmp_path):
    path = tmp_path / "model.bobn"
    save_checkpoint(tiny_model, path, ["heart", "aorta"])
    restored, names = load_checkpoint(path)

    assert names == ["heart", "aorta"]
    assert restored.spec.channel_scale == tiny_model.spec.channel_scale
    for a, b in zip(tiny_model.parameters.tensors(), restored.parameters.tensors()):
        assert a.tobytes() == b.tobytes()
    assert encode_checkpoint(restored) == path.read_bytes()


def test_restored_model_predicts_identically(tiny_model, rng):
    restored = decode_checkpoint(io.BytesIO(encode_checkpoint(tiny_model)))
    image = rng.uniform(-1, 1, size=(1, 64, 64)).astype(np.float32)
    np.testing.assert_array_equal(restored.predict_slice(image), tiny_model.predict_slice(image))


def test_default_names_without_sidecar(tiny_model, tmp_path):
    path = tmp_path / "model.bobn"
    save_checkpoint(tiny_model, path)
    assert not names_path(path).exists()
    assert load_checkpoint(path)[1] == ["structure_0", "structure_1"]


def test_training_spacing_sidecar(tiny_model, tmp_path):
    path = tmp_path / "model.bobn"
    save_checkpoint(tiny_model, path, ["heart", "aorta"], target_spacing_mm=2.0)
    assert spacing_path(path).read_text(encoding="utf-8") == "2.0\n"
    assert load_training_spacing(path) == 2.0

    other = tmp_path / "plain.bobn"
    save_checkpoint(tiny_model, other)
    assert load_training_spacing(other) is None


@pytest.mark.parametrize("text", ["fast\n", "0\n", "-1.5\n"])
def test_bad_training_spacing_sidecar(tiny_model, tmp_path, text):
    path = tmp_path / "model.bobn"
    save_checkpoint(tiny_model, path)
    spacing_path(path).write_text(text, encoding="utf-8")
    with pytest.raises(CheckpointFormatError):
        load_training_spacing(path)


def test_rejects_nonpositive_spacing(tiny_model, tmp_path):
    with pytest.raises(ValueError):
        save_checkpoint(tiny_model, tmp_path / "model.bobn", target_spacing_mm=0.0)


def test_name_count_must_match(tiny_model, tmp_path):
    with pytest.raises(ValueError):
        save_checkpoint(tiny_model, tmp_path / "model.bobn", ["heart"])


def test_sidecar_with_wrong_count(tiny_model, tmp_path):
    path = tmp_path / "model.bobn"
    save_checkpoint(tiny_model, path, ["heart", "aorta"])
    names_path(path).write_text("heart\n", encoding="utf-8")
    with pytest.raises(CheckpointFormatError):
        load_checkpoint(path)


def test_bad_magic(tiny_model):
    data = b"NOPE" + encode_checkpoint(tiny_model)[4:]
    with pytest.raises(CheckpointFormatError, match="magic"):
        decode_checkpoint(io.BytesIO(data))


def test_unsupported_version(tiny_model):
    data = bytearray(encode_checkpoint(tiny_model))
    data[4:8] = struct.pack("<I", 2)
    with pytest.raises(CheckpointFormatError, match="version"):
        decode_checkpoint(io.BytesIO(bytes(data)))


def test_truncated(tiny_model):
    data = encode_checkpoint(tiny_model)
    with pytest.raises(CheckpointFormatError, match="truncated"):
        decode_checkpoint(io.BytesIO(data[:-1]))


def test_trailing_bytes(tiny_model):
    with pytest.raises(CheckpointFormatError, match="trailing"):
        decode_checkpoint(io.BytesIO(encode_checkpoint(tiny_model) + b"\0"))


def test_float64_model_is_stored_as_float32(tmp_path):
    model = build_bobnet(1, "1/8", rng=np.random.default_rng(5), dtype=np.float64)
    path = tmp_path / "wide.bobn"
    save_checkpoint(model, path)
    restored, _ = load_checkpoint(path)
    for a, b in zip(model.parameters.tensors(), restored.parameters.tensors()):
        assert b.dtype == np.float32
        np.testing.assert_array_equal(a.astype(np.float32), b)
