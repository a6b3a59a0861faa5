"""Dataset-level contamination: class-keyed backgrounds and label flips."""

from dataclasses import dataclass, field

import numpy as np

from .dataset import ImageExample, LabeledDataset
from .shapes import neutral_background, spurious_texture


@dataclass
class SpuriousSpec:
    """Class-to-background-texture confound description.

    `mapping` must assign every class a texture id, each class a distinct
    one. fraction is the share of examples whose background is replaced.
    """

    mapping: dict = field(default_factory=dict)  # label -> texture id
    fraction: float = 1.0
    seed: int = 0

    def validate(self, class_count):
        mapping = self.resolved_mapping(class_count)
        if sorted(mapping) != list(range(class_count)):
            raise ValueError("mapping must cover every class exactly once")
        if len(set(mapping.values())) != class_count:
            raise ValueError("distinct classes must map to distinct textures")
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError("fraction must lie in [0, 1]")

    def resolved_mapping(self, class_count):
        if self.mapping:
            return {int(k): int(v) for k, v in self.mapping.items()}
        return {c: c for c in range(class_count)}


def compose_spurious(ds: LabeledDataset, spec: SpuriousSpec) -> LabeledDataset:
    """Replace background pixels with the class-mapped texture.

    Object pixels are untouched bit-for-bit; the affected index set and
    the texture/instance ids land in provenance so the exact background
    of every example can be re-rendered later.
    """
    spec.validate(ds.class_count)
    mapping = spec.resolved_mapping(ds.class_count)
    n = len(ds)
    for i, ex in enumerate(ds.examples):
        if ex.object_mask is None:
            raise ValueError(f"example {i} has no object mask")

    k = int(round(spec.fraction * n))
    rng = np.random.default_rng(np.random.SeedSequence([int(spec.seed), 0]))
    indices = sorted(int(i) for i in rng.choice(n, size=k, replace=False))

    chosen = set(indices)
    size = ds.image_shape[0]
    channels = ds.image_shape[2]
    examples = []
    texture_ids = []
    background_ids = []
    for i, ex in enumerate(ds.examples):
        if i not in chosen:
            examples.append(ex)
            continue
        bg_id = int(np.random.SeedSequence([int(spec.seed), 1, i]).generate_state(1)[0] & 0x7FFFFFFF)
        tex = mapping[ex.label]
        background = spurious_texture(tex, bg_id, size, channels)
        image = np.where(ex.object_mask[:, :, None] > 0, ex.image, background)
        examples.append(ImageExample(image=image, label=ex.label, object_mask=ex.object_mask, background_id=bg_id))
        texture_ids.append(tex)
        background_ids.append(bg_id)

    record = {
        "op": "compose_spurious",
        "mapping": [[int(k_), int(v)] for k_, v in sorted(mapping.items())],
        "fraction": float(spec.fraction),
        "seed": int(spec.seed),
        "indices": indices,
        "texture_ids": texture_ids,
        "background_ids": background_ids,
    }
    return ds.with_examples(examples, record)


def flip_labels(ds: LabeledDataset, fraction: float, seed: int) -> LabeledDataset:
    """Give round(fraction * n) examples a different uniform label."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must lie in [0, 1]")
    if ds.class_count < 2:
        raise ValueError("cannot flip labels in a single-class dataset")
    n = len(ds)
    k = int(round(fraction * n))
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0]))
    indices = sorted(int(i) for i in rng.choice(n, size=k, replace=False))
    chosen = set(indices)
    examples = []
    new_labels = []
    for i, ex in enumerate(ds.examples):
        if i not in chosen:
            examples.append(ex)
            continue
        shift = int(rng.integers(1, ds.class_count))
        label = (ex.label + shift) % ds.class_count
        new_labels.append(label)
        examples.append(ImageExample(image=ex.image, label=label, object_mask=ex.object_mask, background_id=ex.background_id))
    record = {
        "op": "flip_labels",
        "fraction": float(fraction),
        "seed": int(seed),
        "indices": indices,
        "new_labels": new_labels,
    }
    return ds.with_examples(examples, record)


def background_image(ds: LabeledDataset, index: int) -> np.ndarray:
    """Re-render example `index`'s background with no object anywhere."""
    size = ds.image_shape[0]
    channels = ds.image_shape[2]
    for record in reversed(ds.provenance):
        if record["op"] == "compose_spurious" and index in record["indices"]:
            pos = record["indices"].index(index)
            return spurious_texture(record["texture_ids"][pos], record["background_ids"][pos], size, channels)
        if record["op"] == "gen_shapes":
            ex = ds.examples[index]
            if ex.background_id is None:
                break
            return neutral_background(ex.background_id, size, channels)
    raise ValueError(f"no background provenance for example {index}")


def strip_objects(ds: LabeledDataset) -> LabeledDataset:
    """Replace every image with its object-free background render."""
    examples = []
    for i, ex in enumerate(ds.examples):
        bg = background_image(ds, i)
        examples.append(
            ImageExample(
                image=bg,
                label=ex.label,
                object_mask=np.zeros_like(ex.object_mask),
                background_id=ex.background_id,
            )
        )
    return ds.with_examples(examples, {"op": "strip_objects"})
