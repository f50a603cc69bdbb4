"""Shared fixtures for the bobnet test suite."""

from pathlib import Path

import numpy as np
import pytest

from bobnet.data.phantom import PhantomRandomizer, ShapeKind, StructureTemplate, gen_dataset
from bobnet.imaging.volume import Volume3D
from bobnet.model.bobnet import build_bobnet
from bobnet.utils.config import RunConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def marker_volume():
    """4x5x6 volume, zero except voxel (1, 2, 3) = 7."""
    voxels = np.zeros((4, 5, 6), dtype=np.float32)
    voxels[1, 2, 3] = 7.0
    return Volume3D(voxels, (1.0, 1.0, 1.0))


@pytest.fixture
def tiny_model():
    """Eighth-width BoBNet for two structures."""
    return build_bobnet(2, channel_scale="1/8", rng=np.random.default_rng(0))


@pytest.fixture
def small_randomizer():
    """Two structures that fit into 16^3 volumes at 1.5 mm."""
    return PhantomRandomizer(
        dims=(16, 16, 16),
        spacing_mm=(1.5, 1.5, 1.5),
        structures=[
            StructureTemplate("heart", ShapeKind.ELLIPSOID, radius_mm=(3.0, 6.0),
                              intensity=(300.0, 400.0)),
            StructureTemplate("aorta", ShapeKind.TUBE, radius_mm=(1.5, 3.0),
                              intensity=(500.0, 600.0), length_mm=(6.0, 12.0), axis=2),
        ],
        noise_fraction=0.1,
    )


@pytest.fixture
def small_dataset(tmp_path, small_randomizer) -> Path:
    root = tmp_path / "synth"
    gen_dataset(root, 10, small_randomizer, seed=7)
    return root


@pytest.fixture
def quick_config():
    """Settings small enough for a couple of CPU epochs."""
    return RunConfig(
        epochs=2,
        batch_size=32,
        min_input=64,
        channel_scale="1/8",
        max_rotation_deg=5.0,
        target_spacing_mm=1.5,
        seed=3,
    )
