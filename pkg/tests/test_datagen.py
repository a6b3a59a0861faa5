"""Generator, compositing, label-flip, and provenance-replay contracts."""

import numpy as np
import pytest

from attrdebug.datagen import (
    SpuriousSpec,
    background_image,
    compose_spurious,
    datasets_equal,
    flip_labels,
    gen_shapes,
    gt1_mask,
    load_dataset,
    neutral_background,
    replay,
    save_dataset,
    strip_objects,
)
from attrdebug.datagen.dataset import ImageExample, LabeledDataset


def small_ds(seed=3, n=24, classes=2, size=16):
    return gen_shapes(seed=seed, n=n, classes=classes, image_size=size)


class TestGenShapes:
    def test_deterministic(self):
        assert datasets_equal(small_ds(seed=5), small_ds(seed=5))
        assert not datasets_equal(small_ds(seed=5), small_ds(seed=6))

    def test_class_balance_exact(self):
        ds = gen_shapes(seed=1, n=200, classes=2, image_size=16)
        counts = np.bincount(ds.labels_array())
        assert counts.tolist() == [100, 100]

    def test_class_balance_within_one(self):
        ds = gen_shapes(seed=1, n=17, classes=3, image_size=16)
        counts = np.bincount(ds.labels_array(), minlength=3)
        assert counts.max() - counts.min() <= 1

    def test_mask_exactly_covers_object(self):
        ds = small_ds(seed=7)
        for i, ex in enumerate(ds.examples):
            bg = neutral_background(ex.background_id, 16, 3)
            off_object = ex.object_mask == 0
            assert np.array_equal(ex.image[off_object], bg[off_object])
            # object pixels differ from the background render somewhere
            assert not np.array_equal(ex.image, bg)

    def test_values_in_unit_range(self):
        ds = small_ds(seed=9)
        imgs = ds.images_array()
        assert imgs.min() >= 0.0 and imgs.max() <= 1.0

    def test_preconditions(self):
        with pytest.raises(ValueError):
            gen_shapes(seed=0, n=1, classes=2, image_size=16)
        with pytest.raises(ValueError):
            gen_shapes(seed=0, n=10, classes=1, image_size=16)
        with pytest.raises(ValueError):
            gen_shapes(seed=0, n=10, classes=2, image_size=8)


class TestComposeSpurious:
    def test_fraction_zero_is_identity(self):
        ds = small_ds()
        out = compose_spurious(ds, SpuriousSpec(fraction=0.0, seed=1))
        assert np.array_equal(out.images_array(), ds.images_array())
        assert out.provenance[-1]["op"] == "compose_spurious"

    def test_object_pixels_bit_identical(self):
        ds = small_ds()
        out = compose_spurious(ds, SpuriousSpec(fraction=1.0, seed=2))
        for before, after in zip(ds.examples, out.examples):
            on_object = before.object_mask > 0
            assert np.array_equal(before.image[on_object], after.image[on_object])
            assert not np.array_equal(before.image, after.image)

    def test_distinct_textures_required(self):
        ds = small_ds()
        with pytest.raises(ValueError, match="distinct"):
            compose_spurious(ds, SpuriousSpec(mapping={0: 1, 1: 1}, seed=3))

    def test_partial_fraction_counts(self):
        ds = small_ds(n=30)
        out = compose_spurious(ds, SpuriousSpec(fraction=0.5, seed=4))
        changed = sum(
            0 if np.array_equal(a.image, b.image) else 1 for a, b in zip(ds.examples, out.examples)
        )
        assert changed == 15

    def test_missing_mask_rejected(self):
        ex = ImageExample(image=np.zeros((16, 16, 3)), label=0, object_mask=None)
        ex2 = ImageExample(image=np.zeros((16, 16, 3)), label=1, object_mask=np.ones((16, 16)))
        ds = LabeledDataset.__new__(LabeledDataset)
        ds.examples = [ex, ex2]
        ds.class_count = 2
        ds.split = "train"
        ds.provenance = []
        ds._images = None
        ds._labels = None
        with pytest.raises(ValueError, match="mask"):
            compose_spurious(ds, SpuriousSpec(seed=0))


class TestFlipLabels:
    def test_fraction_zero_identity(self):
        ds = small_ds()
        out = flip_labels(ds, 0.0, seed=1)
        assert np.array_equal(out.labels_array(), ds.labels_array())

    def test_exact_flip_count_and_validity(self):
        ds = gen_shapes(seed=2, n=1000, classes=2, image_size=16)
        out = flip_labels(ds, 0.1, seed=3)
        diff = out.labels_array() != ds.labels_array()
        assert diff.sum() == 100
        record = out.provenance[-1]
        assert record["op"] == "flip_labels"
        assert sorted(record["indices"]) == sorted(np.flatnonzero(diff).tolist())

    def test_flipped_labels_always_differ(self):
        ds = gen_shapes(seed=4, n=60, classes=3, image_size=16)
        out = flip_labels(ds, 1.0, seed=5)
        assert np.all(out.labels_array() != ds.labels_array())

    def test_single_class_rejected(self):
        ds = small_ds()
        ds = LabeledDataset(ds.examples, ds.class_count, ds.split, ds.provenance)
        ds.class_count = 1
        with pytest.raises(ValueError, match="single-class"):
            flip_labels(ds, 0.5, seed=0)


class TestGt1:
    def test_partition_identity(self):
        ds = small_ds()
        for ex in ds.examples:
            assert np.array_equal(gt1_mask(ex) + ex.object_mask, np.ones((16, 16)))

    def test_all_object_and_all_background(self):
        all_obj = ImageExample(image=np.ones((16, 16, 3)), label=0, object_mask=np.ones((16, 16)))
        all_bg = ImageExample(image=np.ones((16, 16, 3)), label=0, object_mask=np.zeros((16, 16)))
        assert gt1_mask(all_obj).sum() == 0
        assert gt1_mask(all_bg).sum() == 16 * 16


class TestBackgroundsAndStripping:
    def test_background_render_matches_composed_pixels(self):
        ds = compose_spurious(small_ds(), SpuriousSpec(fraction=1.0, seed=6))
        for i, ex in enumerate(ds.examples):
            bg = background_image(ds, i)
            off_object = ex.object_mask == 0
            assert np.array_equal(ex.image[off_object], bg[off_object])

    def test_strip_objects_removes_masks(self):
        ds = compose_spurious(small_ds(), SpuriousSpec(fraction=1.0, seed=6))
        stripped = strip_objects(ds)
        for i, ex in enumerate(stripped.examples):
            assert ex.object_mask.sum() == 0
            assert np.array_equal(ex.image, background_image(ds, i))
        assert [e.label for e in stripped.examples] == [e.label for e in ds.examples]


class TestProvenance:
    def test_replay_reproduces_chained_mutations(self):
        ds = small_ds(seed=11, n=20)
        ds = compose_spurious(ds, SpuriousSpec(fraction=0.5, seed=12))
        ds = flip_labels(ds, 0.25, seed=13)
        ds = strip_objects(ds)
        assert datasets_equal(replay(ds.provenance), ds)

    def test_disjoint_mutations_commute(self):
        base = small_ds(seed=14, n=40)
        # compose touches images, flip touches labels: disjoint fields
        a = flip_labels(compose_spurious(base, SpuriousSpec(fraction=1.0, seed=15)), 0.2, seed=16)
        b = compose_spurious(flip_labels(base, 0.2, seed=16), SpuriousSpec(fraction=1.0, seed=15))
        assert np.array_equal(a.labels_array(), b.labels_array())
        # backgrounds may differ because composition keys textures on labels;
        # restrict the check to examples whose labels were not flipped
        flipped = set(a.provenance[-1]["indices"])
        for i in range(len(base)):
            if i not in flipped:
                assert np.array_equal(a.examples[i].image, b.examples[i].image)

    def test_container_round_trip(self, tmp_path):
        ds = compose_spurious(small_ds(seed=17), SpuriousSpec(fraction=1.0, seed=18))
        path = tmp_path / "cache.adds"
        save_dataset(ds, path)
        assert datasets_equal(load_dataset(path), ds)
