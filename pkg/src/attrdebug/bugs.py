"""Declarative contamination injectors.

A BugSpec names one contamination; `inject` applies its direct effect to
a Pipeline (datasets + network + test transform) without retraining.
Data bugs rewrite the training data, model bugs rewrite parameters or
the train config, test-time bugs only change how test inputs are seen.
The harness decides when a rewrite requires retraining.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .attributions import MethodSpec, compute_attribution
from .datagen import SpuriousSpec, compose_spurious, flip_labels
from .nn import Network, TrainConfig, reinit_layers

CATEGORY_OF_KIND = {
    "spurious": "data",
    "label_flip": "data",
    "reinit": "model",
    "frozen": "model",
    "ood": "test_time",
    "preprocess_mismatch": "test_time",
}


@dataclass
class BugSpec:
    kind: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    category: str = ""

    def __post_init__(self):
        if self.kind not in CATEGORY_OF_KIND:
            raise ValueError(f"unknown bug kind {self.kind!r}; known: {sorted(CATEGORY_OF_KIND)}")
        expected = CATEGORY_OF_KIND[self.kind]
        if not self.category:
            self.category = expected
        elif self.category != expected:
            raise ValueError(f"bug kind {self.kind!r} belongs to category {expected!r}, not {self.category!r}")

    def to_record(self):
        return {"kind": self.kind, "category": self.category, "seed": self.seed, "params": self.params}

    @classmethod
    def from_record(cls, record):
        return cls(kind=record["kind"], params=dict(record.get("params", {})), seed=record.get("seed", 0), category=record.get("category", ""))


@dataclass
class Pipeline:
    """One train/attribute/evaluate lane: datasets, net, test transform."""

    train_data: object
    val_data: object
    test_data: object
    net: Network | None
    train_cfg: TrainConfig
    test_transform: str | None = None
    applied: list = field(default_factory=list)
    ood_data: object = None  # replacement test split for the ood bug

    def needs_retraining(self):
        return any(s.kind in ("spurious", "label_flip", "frozen") for s in self.applied)


# canonical wrong test-time transforms
def _scale_255(x):
    return x * 255.0


def _channel_swap(x):
    return x[..., ::-1]


def _standardize_mismatch(x):
    return (x - 0.5) / 0.25


PREPROCESS_TRANSFORMS = {
    "scale_255": _scale_255,
    "channel_swap": _channel_swap,
    "standardize": _standardize_mismatch,
}


def apply_test_transform(transform_id, images):
    if transform_id is None:
        return images
    try:
        fn = PREPROCESS_TRANSFORMS[transform_id]
    except KeyError:
        raise ValueError(f"unknown preprocess transform {transform_id!r}") from None
    return fn(np.asarray(images, dtype=np.float64))


def inject(spec: BugSpec, pipeline: Pipeline) -> Pipeline:
    """Apply one bug's direct effect; returns a new Pipeline."""
    kind = spec.kind
    out = replace(pipeline, applied=pipeline.applied + [spec])
    if kind == "spurious":
        if pipeline.train_data is None:
            raise ValueError("spurious bug needs a training dataset")
        sspec = SpuriousSpec(
            mapping=dict(spec.params.get("mapping", {})),
            fraction=float(spec.params.get("fraction", 1.0)),
            seed=spec.seed,
        )
        out.train_data = compose_spurious(pipeline.train_data, sspec)
        if pipeline.val_data is not None:
            out.val_data = compose_spurious(pipeline.val_data, replace(sspec, seed=sspec.seed + 1))
        if pipeline.test_data is not None:
            out.test_data = compose_spurious(pipeline.test_data, replace(sspec, seed=sspec.seed + 2))
        return out
    if kind == "label_flip":
        if pipeline.train_data is None:
            raise ValueError("label_flip bug needs a training dataset")
        out.train_data = flip_labels(pipeline.train_data, float(spec.params.get("fraction", 0.1)), spec.seed)
        return out
    if kind == "reinit":
        if pipeline.net is None:
            raise ValueError("reinit bug needs a trained network")
        indices = spec.params.get("layer_indices")
        if indices is None:
            count = int(spec.params.get("top_layers", 1))
            indices = pipeline.net.parameterized_indices[-count:]
        out.net = reinit_layers(pipeline.net, indices, spec.seed)
        return out
    if kind == "frozen":
        indices = frozenset(int(i) for i in spec.params["layer_indices"])
        out.train_cfg = replace(pipeline.train_cfg, frozen_layers=indices)
        return out
    if kind == "ood":
        if pipeline.ood_data is None and "dataset" not in spec.params:
            raise ValueError("ood bug needs a replacement test dataset")
        out.test_data = pipeline.ood_data if pipeline.ood_data is not None else spec.params["dataset"]
        return out
    if kind == "preprocess_mismatch":
        transform = spec.params.get("transform", "scale_255")
        if transform not in PREPROCESS_TRANSFORMS:
            raise ValueError(f"unknown preprocess transform {transform!r}")
        out.test_transform = transform
        return out
    raise ValueError(f"unhandled bug kind {kind!r}")


def adapt_channels(images, target_channels: int):
    """Replicate grayscale to the channel count a network expects."""
    images = np.asarray(images, dtype=np.float64)
    have = images.shape[-1]
    if have == target_channels:
        return images
    if have == 1:
        return np.repeat(images, target_channels, axis=-1)
    raise ValueError(f"cannot adapt {have}-channel inputs to {target_channels} channels")


def cascading_randomization(net: Network, inputs, methods, seed: int, stages=None, baselines=None, target_classes=None):
    """Per-stage attribution maps under cumulative top-down re-initialization.

    Stage k re-initializes the top k parameterized layers (stage 0 is the
    original model). Returns {stage: {method id: [AttributionMap per input]}}.
    Layer redraw streams are keyed on (seed, layer index), so stage k's
    randomized set always extends stage k-1's.
    """
    if not methods:
        raise ValueError("need at least one attribution method")
    param_indices = net.parameterized_indices
    n_stages = len(param_indices)
    if stages is None:
        stages = range(0, n_stages + 1)
    stages = sorted(set(int(s) for s in stages))
    if any(s < 0 or s > n_stages for s in stages):
        raise ValueError(f"stages must lie in [0, {n_stages}]")
    inputs = np.asarray(inputs, dtype=np.float64)
    if target_classes is None:
        target_classes = net.forward_batch(inputs).scores.argmax(axis=1)

    specs = [m if isinstance(m, MethodSpec) else MethodSpec(m) for m in methods]
    table = {}
    for stage in stages:
        stage_net = net if stage == 0 else reinit_layers(net, param_indices[-stage:], seed)
        per_method = {}
        for spec in specs:
            per_method[spec.method] = [
                compute_attribution(spec, stage_net, x, int(cls), baselines=baselines)
                for x, cls in zip(inputs, target_classes)
            ]
        table[stage] = per_method
    return table


def ood_pairing(in_domain_net: Network, out_domain_nets, dataset, methods, sample_count=None, baselines=None):
    """Maps for each input from the in-domain net and every out-domain net.

    Returns {net label: {method id: [AttributionMap]}} with "in_domain"
    first; inputs are channel-adapted per network where needed. Target
    class is the in-domain net's prediction, so pairs share a target.
    """
    specs = [m if isinstance(m, MethodSpec) else MethodSpec(m) for m in methods]
    images = dataset.images_array()
    if sample_count is not None:
        images = images[:sample_count]
    nets = {"in_domain": in_domain_net}
    for j, net in enumerate(out_domain_nets):
        nets[f"out_domain_{j}"] = net

    in_images = adapt_channels(images, in_domain_net.input_shape[-1])
    target_classes = in_domain_net.forward_batch(in_images).scores.argmax(axis=1)

    table = {}
    for label, net in nets.items():
        adapted = adapt_channels(images, net.input_shape[-1])
        if adapted.shape[1:] != net.input_shape:
            raise ValueError(f"{label}: inputs {adapted.shape[1:]} do not fit network {net.input_shape}")
        per_method = {}
        for spec in specs:
            per_method[spec.method] = [
                compute_attribution(spec, net, x, int(cls) % net.class_count, baselines=baselines)
                for x, cls in zip(adapted, target_classes)
            ]
        table[label] = per_method
    return table
