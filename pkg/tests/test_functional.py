"""Tests for the stateless network operations."""

import math

import numpy as np
import pytest

from bobnet.nn import functional as F
from bobnet.nn.init import fan_in_out, glorot_bound, glorot_uniform_init


def naive_conv(x, weights, biases):
    c_in, h, w = x.shape
    padded = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    out = np.zeros((weights.shape[0], h, w))
    for o in range(weights.shape[0]):
        for i in range(h):
            for j in range(w):
                out[o, i, j] = biases[o] + np.sum(padded[:, i:i + 3, j:j + 3] * weights[o])
    return out


def naive_pool(x):
    c, h, w = x.shape
    out = np.zeros((c, h // 2, w // 2))
    for ch in range(c):
        for i in range(h // 2):
            for j in range(w // 2):
                out[ch, i, j] = max(x[ch, 2 * i + a, 2 * j + b] for a in range(2) for b in range(2))
    return out


class TestConv:
    def test_zero_input_gives_bias(self, rng):
        weights = rng.normal(size=(3, 1, 3, 3))
        biases = np.array([0.5, -1.0, 2.0])
        out = F.conv3x3_forward(np.zeros((1, 4, 4)), weights, biases)
        assert out.shape == (3, 4, 4)
        for channel, bias in enumerate(biases):
            assert np.all(out[channel] == bias)

    def test_center_delta_is_unflipped_dot_product(self, rng):
        x = np.zeros((1, 3, 3))
        x[0, 1, 1] = 1.0
        kernel = rng.normal(size=(1, 1, 3, 3))
        out = F.conv3x3_forward(x, kernel, np.zeros(1))
        # cross-correlation: the center output sees the kernel center
        assert out[0, 1, 1] == pytest.approx(float(np.sum(kernel[0, 0] * x[0])))
        assert out[0, 1, 1] == pytest.approx(kernel[0, 0, 1, 1])

    @pytest.mark.parametrize("shape", [(1, 8, 8), (3, 5, 7), (2, 16, 16)])
    def test_matches_naive_loop(self, rng, shape):
        x = rng.normal(size=shape)
        weights = rng.normal(size=(4, shape[0], 3, 3))
        biases = rng.normal(size=4)
        np.testing.assert_allclose(F.conv3x3_forward(x, weights, biases),
                                   naive_conv(x, weights, biases), rtol=1e-6, atol=1e-9)

    def test_channel_mismatch(self, rng):
        with pytest.raises(ValueError, match="channels"):
            F.conv3x3_forward(np.zeros((2, 4, 4)), rng.normal(size=(1, 3, 3, 3)), np.zeros(1))

    def test_too_small(self, rng):
        with pytest.raises(ValueError):
            F.conv3x3_forward(np.zeros((1, 2, 4)), rng.normal(size=(1, 1, 3, 3)), np.zeros(1))


class TestMaxPool:
    def test_constant(self):
        assert np.all(F.maxpool2x2_forward(np.full((2, 6, 6), 3.5)) == 3.5)

    def test_single_window(self):
        out = F.maxpool2x2_forward(np.array([[[1.0, 2.0], [3.0, 4.0]]]))
        assert out.tolist() == [[[4.0]]]

    def test_odd_extent_drops_trailing(self, rng):
        x = rng.normal(size=(3, 7, 7))
        out = F.maxpool2x2_forward(x)
        assert out.shape == (3, 3, 3)
        np.testing.assert_allclose(out, naive_pool(x))

    def test_batch_matches_naive(self, rng):
        x = rng.normal(size=(2, 2, 16, 16))
        out = F.maxpool2x2_forward(x)
        for b in range(2):
            np.testing.assert_allclose(out[b], naive_pool(x[b]))


class TestSpatialPyramidPooling:
    def test_length_for_128_channels(self, rng):
        assert F.spp_forward(rng.normal(size=(128, 14, 14))).shape == (2688,)

    def test_constant(self):
        out = F.spp_forward(np.full((3, 9, 5), -2.0))
        assert out.shape == (63,)
        assert np.all(out == -2.0)

    def test_bins_match_enumeration(self):
        h, w = 5, 7
        x = np.random.default_rng(5).permutation(h * w).astype(np.float64).reshape(1, h, w)
        expected = []
        for n in (4, 2, 1):
            for r in range(n):
                rows = [i for i in range(h) if math.floor(r * h / n) <= i < math.ceil((r + 1) * h / n)]
                for c in range(n):
                    cols = [j for j in range(w) if math.floor(c * w / n) <= j < math.ceil((c + 1) * w / n)]
                    expected.append(max(x[0, i, j] for i in rows for j in cols))
        np.testing.assert_array_equal(F.spp_forward(x), expected)

    def test_length_sweep(self, rng):
        for _ in range(10):
            c, h, w = rng.integers(1, 5), rng.integers(4, 20), rng.integers(4, 20)
            assert F.spp_forward(rng.normal(size=(c, h, w))).shape == (21 * c,)

    def test_channel_major_order(self):
        x = np.stack([np.zeros((4, 4)), np.ones((4, 4))])
        out = F.spp_forward(x)
        assert np.all(out[:21] == 0) and np.all(out[21:] == 1)

    def test_too_small(self):
        with pytest.raises(ValueError):
            F.spp_forward(np.zeros((1, 3, 8)))

    def test_bin_maxima_on_large_random_sizes(self):
        rng = np.random.default_rng(51)
        for _ in range(200):
            h, w = (int(v) for v in rng.integers(64, 513, size=2))
            x = rng.normal(size=(2, h, w))
            expected = []
            for channel in x:
                for n in (4, 2, 1):
                    for r in range(n):
                        r0, r1 = math.floor(r * h / n), math.ceil((r + 1) * h / n)
                        for c in range(n):
                            c0, c1 = math.floor(c * w / n), math.ceil((c + 1) * w / n)
                            expected.append(channel[r0:r1, c0:c1].max())
            np.testing.assert_array_equal(F.spp_forward(x), expected)


class TestPairedSoftmax:
    def test_symmetric_pair(self):
        np.testing.assert_allclose(F.paired_softmax(np.zeros(2)), [0.5, 0.5])

    def test_log_two(self):
        np.testing.assert_allclose(F.paired_softmax(np.array([math.log(2), 0.0])), [2 / 3, 1 / 3])

    def test_pairs_are_independent(self):
        np.testing.assert_allclose(F.paired_softmax(np.array([5.0, 5.0, -1.0, -1.0])), [0.5] * 4)

    def test_pairs_sum_to_one(self, rng):
        probs = F.paired_softmax(rng.normal(scale=20, size=(16, 10)))
        pairs = probs.reshape(16, 5, 2)
        np.testing.assert_allclose(pairs.sum(axis=-1), 1.0, atol=1e-6)
        assert probs.min() >= 0 and probs.max() <= 1

    def test_odd_length(self):
        with pytest.raises(ValueError):
            F.paired_softmax(np.zeros(3))


class TestCrossEntropy:
    def test_half_half_present(self):
        assert F.cross_entropy_paired(np.array([0.5, 0.5]), [True]) == pytest.approx(0.6931, abs=1e-4)

    def test_perfect_prediction(self):
        assert F.cross_entropy_paired(np.array([1 - 1e-12, 1e-12]), [True]) == pytest.approx(0.0, abs=1e-9)

    def test_two_structures(self):
        loss = F.cross_entropy_paired(np.full(4, 0.5), [True, False])
        assert loss == pytest.approx(1.3863, abs=1e-4)

    def test_saturated_wrong_is_clamped(self):
        loss = F.cross_entropy_paired(np.array([0.0, 1.0]), [True])
        assert loss == pytest.approx(-math.log(F.LOG_CLAMP))


class TestGlorot:
    def test_bound(self):
        assert glorot_bound(128, 128) == pytest.approx(0.15309, abs=1e-5)

    def test_conv_fans_include_receptive_field(self):
        assert fan_in_out((16, 8, 3, 3)) == (72, 144)

    def test_samples_within_bound_and_centered(self):
        sample = glorot_uniform_init((128, 128), np.random.default_rng(2), np.float64)
        bound = glorot_bound(128, 128)
        assert np.abs(sample).max() <= bound
        big = glorot_uniform_init((400, 250), np.random.default_rng(3), np.float64)
        assert abs(big.mean()) < glorot_bound(250, 400) / 10

    def test_deterministic(self):
        a = glorot_uniform_init((4, 2, 3, 3), np.random.default_rng(9))
        b = glorot_uniform_init((4, 2, 3, 3), np.random.default_rng(9))
        np.testing.assert_array_equal(a, b)


class TestDropout:
    def test_inference_is_identity(self, rng):
        x = rng.normal(size=(4, 8))
        assert F.dropout_apply(x, 0.5, rng, training=False) is x

    def test_zero_rate(self, rng):
        x = rng.normal(size=(4, 8))
        np.testing.assert_array_equal(F.dropout_apply(x, 0.0, rng, training=True), x)

    def test_inverted_scaling_is_unbiased(self):
        out = F.dropout_apply(np.ones(100_000), 0.5, np.random.default_rng(4), training=True)
        assert 0.98 <= out.mean() <= 1.02
        assert set(np.unique(out)) <= {0.0, 2.0}

    def test_rate_out_of_range(self, rng):
        with pytest.raises(ValueError):
            F.dropout_apply(np.ones(3), 1.0, rng, training=True)
