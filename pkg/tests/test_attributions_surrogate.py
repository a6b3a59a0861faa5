"""LIME and KernelSHAP against planted-signal and brute-force oracles."""

from itertools import combinations
from math import comb, factorial

import numpy as np
import pytest

from attrdebug.attributions import kernel_shap, lime, segment_grid
from helpers import random_conv_net


def _segment_means(images, label_map, segments):
    """Per-sample mean intensity of each segment (channel-summed)."""
    flat = images.sum(axis=3).reshape(images.shape[0], -1)
    labels = label_map.ravel()
    out = np.zeros((images.shape[0], segments))
    for s in range(segments):
        out[:, s] = flat[:, labels == s].mean(axis=1)
    return out


class TestSegmentGrid:
    def test_partitions_every_pixel(self):
        labels = segment_grid(12, 16, 8)
        assert labels.shape == (12, 16)
        assert sorted(np.unique(labels)) == list(range(8))

    def test_tiles_are_rectangles(self):
        labels = segment_grid(10, 10, 4)
        for s in range(4):
            rows, cols = np.nonzero(labels == s)
            block = labels[rows.min() : rows.max() + 1, cols.min() : cols.max() + 1]
            assert np.all(block == s)

    def test_bad_counts_rejected(self):
        with pytest.raises(ValueError):
            segment_grid(4, 4, 17)


class TestLime:
    def test_constant_model_gives_zero_weights(self):
        x = np.random.default_rng(1).uniform(0, 1, (12, 12, 1))
        model = lambda images: np.full(len(images), 2.5)  # noqa: E731
        m = lime(model, x, 0, segments=9, num_samples=300, seed=4)
        assert np.abs(m.values).max() < 1e-9

    def test_planted_segment_dominates(self):
        rng = np.random.default_rng(2)
        x = rng.uniform(0.5, 1.0, (12, 12, 1))
        label_map = segment_grid(12, 12, 9)
        target = 4

        def model(images):
            keep = images.sum(axis=3).reshape(len(images), -1)
            return keep[:, (label_map == target).ravel()].sum(axis=1)

        m = lime(model, x, 0, segments=9, num_samples=600, seed=5)
        seg_w = np.array([m.values[:, :, 0][label_map == s][0] for s in range(9)])
        others = np.delete(np.abs(seg_w), target)
        assert np.abs(seg_w[target]) > 5 * others.max()

    def test_same_seed_identical_maps(self):
        rng = np.random.default_rng(3)
        net = random_conv_net(rng, size=8, channels=1)
        x = rng.uniform(0, 1, (8, 8, 1))
        a = lime(net, x, 1, segments=16, num_samples=64, seed=9)
        b = lime(net, x, 1, segments=16, num_samples=64, seed=9)
        assert np.array_equal(a.values, b.values)
        c = lime(net, x, 1, segments=16, num_samples=64, seed=10)
        assert not np.array_equal(a.values, c.values)

    def test_sample_budget_validated(self):
        x = np.zeros((8, 8, 1))
        with pytest.raises(ValueError, match="num_samples"):
            lime(lambda im: np.zeros(len(im)), x, 0, segments=16, num_samples=8)


def brute_force_shapley(value_fn, segments):
    """Exact Shapley values by direct enumeration of the definition."""
    players = list(range(segments))
    phi = np.zeros(segments)
    cache = {}

    def value(subset):
        key = frozenset(subset)
        if key not in cache:
            mask = np.zeros((1, segments))
            mask[0, list(subset)] = 1
            cache[key] = float(value_fn(mask)[0])
        return cache[key]

    for i in players:
        rest = [p for p in players if p != i]
        for size in range(segments):
            weight = factorial(size) * factorial(segments - size - 1) / factorial(segments)
            for subset in combinations(rest, size):
                phi[i] += weight * (value(set(subset) | {i}) - value(set(subset)))
    return phi


class TestKernelShap:
    def _value_fn(self, model, x, label_map):
        mean_color = x.mean(axis=(0, 1))

        def value(masks):
            keep = masks[:, label_map]
            images = np.where(keep[..., None] > 0, x[None], mean_color)
            return model(images)

        return value

    def test_matches_brute_force_shapley(self):
        rng = np.random.default_rng(6)
        segments = 8
        x = rng.uniform(0, 1, (8, 8, 1))
        label_map = segment_grid(8, 8, segments)
        w = rng.normal(size=segments)

        def model(images):
            means = _segment_means(images, label_map, segments)
            return means @ w + 0.6 * means[:, 0] * means[:, 3]  # nonlinear game

        m = kernel_shap(model, x, 0, segments=segments, num_samples=2**segments, seed=7)
        seg_phi = np.array([m.values[:, :, 0][label_map == s][0] for s in range(segments)])
        oracle = brute_force_shapley(self._value_fn(model, x, label_map), segments)
        assert np.abs(seg_phi - oracle).max() < 1e-3

    def test_additive_model_recovers_marginals(self):
        rng = np.random.default_rng(8)
        segments = 9
        x = rng.uniform(0, 1, (9, 9, 1))
        label_map = segment_grid(9, 9, segments)
        w = rng.normal(size=segments)

        def model(images):
            return _segment_means(images, label_map, segments) @ w

        m = kernel_shap(model, x, 0, segments=segments, num_samples=2**segments, seed=9)
        seg_phi = np.array([m.values[:, :, 0][label_map == s][0] for s in range(segments)])
        # marginal of segment s: value swing between keeping and dropping it
        base = _segment_means(np.where(np.zeros((1, 9, 9, 1)) > 0, x[None], x.mean(axis=(0, 1))), label_map, segments)
        kept = _segment_means(x[None], label_map, segments)
        expected = (kept - base)[0] * w
        assert np.abs(seg_phi - expected).max() < 1e-9

    def test_symmetric_segments_get_equal_attribution(self):
        segments = 6
        x = np.ones((6, 6, 1)) * 0.8
        label_map = segment_grid(6, 6, segments)

        def model(images):
            return _segment_means(images, label_map, segments).sum(axis=1)

        m = kernel_shap(model, x, 0, segments=segments, num_samples=2**segments, seed=10)
        seg_phi = np.array([m.values[:, :, 0][label_map == s][0] for s in range(segments)])
        assert np.abs(seg_phi - seg_phi[0]).max() < 1e-6

    def test_additivity_on_real_net(self):
        rng = np.random.default_rng(11)
        net = random_conv_net(rng, size=8, channels=1)
        x = rng.uniform(0, 1, (8, 8, 1))
        m = kernel_shap(net, x, 1, segments=16, num_samples=512, seed=12)
        label_map = segment_grid(8, 8, 16)
        seg_phi = np.array([m.values[:, :, 0][label_map == s][0] for s in range(16)])
        mean_img = np.broadcast_to(x.mean(axis=(0, 1)), x.shape).copy()
        fx = net.forward(x).logit_vector[1]
        f0 = net.forward(mean_img).logit_vector[1]
        assert seg_phi.sum() == pytest.approx(fx - f0, abs=1e-9)
