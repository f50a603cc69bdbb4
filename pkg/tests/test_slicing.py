"""Tests for slice preparation, minibatches and the dataset split."""

import numpy as np
import pytest

from bobnet.data.batching import make_minibatch, nearest_rank, plan_minibatch
from bobnet.data.dataset import split_dataset
from bobnet.data.slicing import (
    FILL_VALUE,
    HU_RANGE,
    MIN_SLICE_SIZE,
    PLANES,
    LabeledSlice,
    Plane,
    Slice2D,
    SliceLabel,
    extract_slices,
    label_slice,
    normalize_intensity,
    pad_to_minimum,
    prepare_volume_slices,
    resample_slice,
    resampled_extent,
    rotate_augment,
)
from bobnet.imaging.boxes import BBox3D
from bobnet.imaging.volume import Volume3D


def make_slice(pixels, spacing=(1.0, 1.0), plane=Plane.AXIAL, index=0):
    return Slice2D(plane, index, np.asarray(pixels, dtype=np.float32), spacing)


def test_constants():
    assert HU_RANGE == 1000
    assert FILL_VALUE == -1
    assert MIN_SLICE_SIZE == 64


class TestExtraction:
    def test_axial_shapes(self, marker_volume):
        slices = extract_slices(marker_volume, Plane.AXIAL)
        assert len(slices) == 6
        assert all(s.shape == (4, 5) for s in slices)
        assert [s.index for s in slices] == list(range(6))

    def test_marker_position(self, marker_volume):
        assert extract_slices(marker_volume, Plane.AXIAL)[3].pixels[1, 2] == 7.0
        assert extract_slices(marker_volume, Plane.CORONAL)[2].pixels[1, 3] == 7.0
        assert extract_slices(marker_volume, Plane.SAGITTAL)[1].pixels[2, 3] == 7.0

    def test_partition_identity(self, rng):
        volume = Volume3D(rng.normal(size=(3, 4, 5)).astype(np.float32), (1.0, 2.0, 3.0))
        for plane in PLANES:
            total = sum(float(s.pixels.sum()) for s in extract_slices(volume, plane))
            assert total == pytest.approx(float(volume.voxels.sum()), rel=1e-5)

    def test_in_plane_spacing(self):
        volume = Volume3D(np.zeros((2, 3, 4), np.float32), (0.5, 0.7, 2.5))
        assert extract_slices(volume, Plane.CORONAL)[0].pixel_spacing_mm == (0.5, 2.5)


class TestResampling:
    def test_extent_arithmetic(self):
        assert resampled_extent(100, 0.75, 1.5) == 50
        # half rounds up
        assert resampled_extent(5, 0.75, 1.5) == 3

    def test_downsample_shape(self):
        out = resample_slice(make_slice(np.zeros((100, 40)), spacing=(0.75, 3.0)), 1.5)
        assert out.shape == (50, 80)
        assert out.pixel_spacing_mm == (1.5, 1.5)

    def test_constant_stays_constant(self):
        out = resample_slice(make_slice(np.full((30, 17), 12.5), spacing=(0.8, 1.3)), 1.5)
        np.testing.assert_allclose(out.pixels, 12.5, atol=1e-5)

    def test_identity(self, rng):
        pixels = rng.normal(size=(20, 30))
        out = resample_slice(make_slice(pixels, spacing=(1.5, 1.5)), 1.5)
        np.testing.assert_allclose(out.pixels, pixels, atol=1e-6)

    def test_rejects_non_positive_target(self):
        with pytest.raises(ValueError):
            resample_slice(make_slice(np.zeros((4, 4))), 0.0)


def test_normalization():
    out = normalize_intensity(make_slice([[0.0, 1000.0, 2500.0, -3000.0, 500.0]]))
    np.testing.assert_allclose(out.pixels, [[0.0, 1.0, 1.0, -1.0, 0.5]])


class TestLabels:
    box = BBox3D("heart", (0, 0, 10), (3, 3, 20))

    @pytest.mark.parametrize("index,present", [(15, True), (21, False), (10, True), (20, True), (9, False)])
    def test_axial_inclusive_bounds(self, index, present):
        label = label_slice(make_slice(np.zeros((4, 4)), index=index), [self.box])
        assert label.presence == (present,)

    def test_plane_uses_its_normal(self):
        label = label_slice(make_slice(np.zeros((4, 4)), plane=Plane.SAGITTAL, index=3), [self.box])
        assert label == SliceLabel((True,))


class TestRotation:
    def test_zero_angle_is_identity(self, rng):
        original = make_slice(rng.normal(size=(32, 32)))
        out = rotate_augment(original, rng, angle=0.0)
        np.testing.assert_allclose(out.pixels, original.pixels, atol=1e-6)

    def test_round_trip_on_smooth_image(self, rng):
        rows, cols = np.mgrid[0:64, 0:64]
        blob = np.exp(-((rows - 32.0) ** 2 + (cols - 32.0) ** 2) / (2 * 8.0 ** 2))
        original = make_slice(blob)
        back = rotate_augment(rotate_augment(original, rng, angle=10.0), rng, angle=-10.0)
        # corners are refilled with -1 on each rotation; compare the inscribed disk
        disk = (rows - 31.5) ** 2 + (cols - 31.5) ** 2 <= 28 ** 2
        assert np.mean(np.abs(back.pixels - original.pixels)[disk]) < 0.05

    def test_constant_slice_keeps_interior(self, rng):
        out = rotate_augment(make_slice(np.full((40, 40), 0.3)), rng, angle=10.0)
        np.testing.assert_allclose(out.pixels[15:25, 15:25], 0.3, atol=1e-6)
        assert out.pixels[0, 0] == pytest.approx(FILL_VALUE)
        assert out.shape == (40, 40)

    def test_random_angle_within_range(self, rng):
        original = make_slice(np.ones((16, 16)))
        for _ in range(5):
            assert rotate_augment(original, rng, max_degrees=10.0).shape == (16, 16)


def test_pad_to_minimum_centers():
    padded = pad_to_minimum(np.zeros((60, 70), dtype=np.float32))
    assert padded.shape == (64, 70)
    assert np.all(padded[:2] == FILL_VALUE) and np.all(padded[-2:] == FILL_VALUE)
    assert np.all(padded[2:62] == 0)


def test_prepare_volume_slices_covers_three_planes(marker_volume):
    boxes = [BBox3D("dot", (1, 2, 3), (1, 2, 3), marker_volume.spacing_mm)]
    labeled = prepare_volume_slices(marker_volume, boxes, 1.0)
    assert len(labeled) == 4 + 5 + 6
    present = [(item.slice.plane, item.slice.index) for item in labeled if item.label.presence[0]]
    assert present == [(Plane.SAGITTAL, 1), (Plane.CORONAL, 2), (Plane.AXIAL, 3)]
    assert max(float(item.slice.pixels.max()) for item in labeled) == pytest.approx(0.007)


class TestMinibatch:
    def test_nearest_rank(self):
        assert nearest_rank([260, 200, 240, 220], 0.25) == 200
        assert nearest_rank([260, 200, 240, 220], 0.75) == 240
        with pytest.raises(ValueError):
            nearest_rank([], 0.5)

    def test_quartile_example(self):
        shapes = [(230, w) for w in (200, 220, 240, 260)]
        targets = set()
        for seed in range(20):
            plan = plan_minibatch(shapes, np.random.default_rng(seed))
            assert plan.width_quartiles == (200, 240)
            targets.add(plan.target[1])
        assert targets <= {224, 240}

    def test_uniform_224_batch_is_unchanged(self, rng):
        items = [
            LabeledSlice(make_slice(rng.normal(size=(224, 224))), SliceLabel((True,)))
            for _ in range(64)
        ]
        batch, labels, plan = make_minibatch(items, rng)
        assert plan.target == (224, 224)
        assert batch.shape == (64, 1, 224, 224)
        assert labels.shape == (64, 1)
        np.testing.assert_array_equal(batch[5, 0], items[5].slice.pixels)

    def test_mixed_sizes_share_one_shape(self, rng):
        sizes = [(60, 90), (80, 70), (100, 100), (66, 120)]
        items = [
            LabeledSlice(make_slice(rng.normal(size=s)), SliceLabel((i % 2 == 0, True)))
            for i, s in enumerate(sizes)
        ]
        batch, labels, plan = make_minibatch(items, rng, min_input=64)
        assert batch.shape == (4, 1) + plan.target
        assert min(plan.target) >= 64
        assert labels.tolist() == [[True, True], [False, True], [True, True], [False, True]]


class TestSplit:
    @pytest.mark.parametrize("count,expected", [(100, (45, 5, 50)), (10, (4, 1, 5)), (11, (4, 1, 6))])
    def test_sizes(self, count, expected):
        ids = [f"v{i}" for i in range(count)]
        split = split_dataset(ids, np.random.default_rng(0))
        assert (len(split.train), len(split.validation), len(split.test)) == expected
        combined = split.train + split.validation + split.test
        assert sorted(combined) == sorted(ids)

    def test_too_few(self):
        with pytest.raises(ValueError):
            split_dataset([f"v{i}" for i in range(9)], np.random.default_rng(0))

    def test_duplicates(self):
        with pytest.raises(ValueError):
            split_dataset(["a"] * 10, np.random.default_rng(0))
