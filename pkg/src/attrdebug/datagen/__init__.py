from .dataset import (
    DatasetFormatError,
    ImageExample,
    LabeledDataset,
    datasets_equal,
    gt1_mask,
    load_dataset,
    save_dataset,
)
from .shapes import SHAPE_NAMES, gen_shapes, neutral_background, spurious_texture
from .corruptions import SpuriousSpec, background_image, compose_spurious, flip_labels, strip_objects
from .idx import IdxFormatError, load_idx, write_idx


def replay(provenance: list) -> LabeledDataset:
    """Rebuild a dataset by re-running its provenance records in order."""
    ds = None
    for record in provenance:
        op = record["op"]
        if op == "gen_shapes":
            ds = gen_shapes(
                record["seed"],
                record["n"],
                record["classes"],
                record["image_size"],
                record["channels"],
                record["split"],
                record.get("shape_offset", 0),
                tuple(record.get("radius_range", (0.15, 0.28))),
            )
        elif op == "load_idx":
            ds = load_idx(
                record["images_path"],
                record["labels_path"],
                record["channels"],
                record["split"],
                record.get("class_count"),
            )
        elif op == "compose_spurious":
            spec = SpuriousSpec(mapping=dict(record["mapping"]), fraction=record["fraction"], seed=record["seed"])
            ds = compose_spurious(ds, spec)
        elif op == "flip_labels":
            ds = flip_labels(ds, record["fraction"], record["seed"])
        elif op == "strip_objects":
            ds = strip_objects(ds)
        else:
            raise ValueError(f"unknown provenance op {op!r}")
    if ds is None:
        raise ValueError("empty provenance")
    return ds


__all__ = [
    "DatasetFormatError",
    "IdxFormatError",
    "ImageExample",
    "LabeledDataset",
    "SHAPE_NAMES",
    "SpuriousSpec",
    "background_image",
    "compose_spurious",
    "datasets_equal",
    "flip_labels",
    "gen_shapes",
    "gt1_mask",
    "load_dataset",
    "load_idx",
    "neutral_background",
    "replay",
    "save_dataset",
    "spurious_texture",
    "strip_objects",
    "write_idx",
]
