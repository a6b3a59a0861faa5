"""Procedural object-on-background image generator.

Objects are flat-colored geometric shapes (disc, cross, triangle, ring)
whose geometry is the only class signal; backgrounds are neutral smooth
noise fields shared across classes. Pixel membership comes from exact
integer-coordinate predicates, so the recorded object mask covers the
rendered object bit-for-bit.
"""

import numpy as np

from .dataset import ImageExample, LabeledDataset

SHAPE_NAMES = ("disc", "cross", "triangle", "ring")


def _derived_int(*key):
    """Stable 31-bit integer derived from an integer key tuple."""
    return int(np.random.SeedSequence(list(key)).generate_state(1)[0] & 0x7FFFFFFF)


def _shape_mask(kind, size, cy, cx, radius):
    rr, cc = np.mgrid[0:size, 0:size].astype(np.float64)
    d2 = (rr - cy) ** 2 + (cc - cx) ** 2
    if kind == "disc":
        return d2 <= radius**2
    if kind == "cross":
        t = max(1.0, radius / 3.0)
        horiz = (np.abs(rr - cy) <= t) & (np.abs(cc - cx) <= radius)
        vert = (np.abs(cc - cx) <= t) & (np.abs(rr - cy) <= radius)
        return horiz | vert
    if kind == "triangle":
        # upright isoceles triangle: apex (cy - r, cx), base at cy + r
        below_apex = rr >= cy - radius
        above_base = rr <= cy + radius
        half_width = (rr - (cy - radius)) / 2.0
        inside = np.abs(cc - cx) <= half_width
        return below_apex & above_base & inside
    if kind == "ring":
        return (d2 <= radius**2) & (d2 >= (0.55 * radius) ** 2)
    raise ValueError(f"unknown shape kind {kind!r}")


def _bilinear_upsample(grid, size):
    """Upsample a small (g, g, C) grid to (size, size, C)."""
    g = grid.shape[0]
    pos = np.linspace(0.0, g - 1.0, size)
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, g - 1)
    frac = pos - lo
    rows = grid[lo][:, :, :] * (1 - frac)[:, None, None] + grid[hi][:, :, :] * frac[:, None, None]
    out = (
        rows[:, lo, :] * (1 - frac)[None, :, None]
        + rows[:, hi, :] * frac[None, :, None]
    )
    return out


def neutral_background(background_id: int, size: int, channels: int) -> np.ndarray:
    """Smooth low-contrast noise field, identical distribution for all classes."""
    rng = np.random.default_rng(np.random.SeedSequence([int(background_id), 7]))
    grid = rng.uniform(0.35, 0.65, size=(5, 5, channels))
    return _bilinear_upsample(grid, size)


# (cycles across the image, orientation in radians, per-channel tint)
_TEXTURE_TABLE = [
    (3.0, 0.0, (0.05, 0.0, -0.05)),
    (5.0, np.pi / 3, (-0.05, 0.05, 0.0)),
    (7.0, 2 * np.pi / 3, (0.0, -0.05, 0.05)),
    (4.0, np.pi / 6, (0.05, -0.05, 0.0)),
    (6.0, np.pi / 2, (-0.05, 0.0, 0.05)),
    (8.0, 5 * np.pi / 6, (0.0, 0.05, -0.05)),
    (5.5, np.pi / 4, (0.05, 0.05, -0.05)),
    (6.5, 3 * np.pi / 4, (-0.05, -0.05, 0.05)),
]


def spurious_texture(texture_id: int, background_id: int, size: int, channels: int) -> np.ndarray:
    """Class-keyed sinusoidal grating with a per-instance phase."""
    freq, angle, tint = _TEXTURE_TABLE[texture_id % len(_TEXTURE_TABLE)]
    rng = np.random.default_rng(np.random.SeedSequence([int(background_id), 11]))
    phase = rng.uniform(0.0, 2 * np.pi)
    rr, cc = np.mgrid[0:size, 0:size].astype(np.float64)
    wave = np.sin(2 * np.pi * freq * (np.cos(angle) * cc + np.sin(angle) * rr) / size + phase)
    base = 0.5 + 0.3 * wave
    img = np.repeat(base[:, :, None], channels, axis=2)
    for ch in range(channels):
        img[:, :, ch] += tint[ch % 3]
    return np.clip(img, 0.0, 1.0)


def gen_shapes(
    seed: int,
    n: int,
    classes: int,
    image_size: int,
    channels: int = 3,
    split: str = "train",
    shape_offset: int = 0,
    radius_range: tuple = (0.15, 0.28),
) -> LabeledDataset:
    """Class-balanced dataset of procedural shapes with exact masks.

    `shape_offset` rotates which geometry each class label draws, so two
    datasets can share labels while depicting disjoint shape families.
    `radius_range` scales object size as a fraction of the image side.
    """
    if classes < 2:
        raise ValueError("need at least 2 classes")
    if classes > len(SHAPE_NAMES):
        raise ValueError(f"at most {len(SHAPE_NAMES)} shape classes are defined")
    if image_size < 16:
        raise ValueError("image_size must be at least 16")
    if n < classes:
        raise ValueError(f"need at least one example per class: n={n} < classes={classes}")

    labels = np.array([i % classes for i in range(n)])
    order_rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0]))
    labels = labels[order_rng.permutation(n)]

    examples = []
    for i in range(n):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 1, i]))
        label = int(labels[i])
        cy = rng.uniform(0.3, 0.7) * image_size
        cx = rng.uniform(0.3, 0.7) * image_size
        radius = rng.uniform(radius_range[0], radius_range[1]) * image_size
        kind = SHAPE_NAMES[(label + shape_offset) % len(SHAPE_NAMES)]
        mask = _shape_mask(kind, image_size, cy, cx, radius)

        bg_id = _derived_int(seed, 2, i)
        background = neutral_background(bg_id, image_size, channels)
        # object colors sit outside the background's mid-gray band so the
        # shape stays visible in every draw
        color = 0.5 + rng.choice([-1.0, 1.0], size=channels) * rng.uniform(0.3, 0.5, size=channels)
        obj = np.clip(color[None, None, :] + rng.uniform(-0.05, 0.05, size=(image_size, image_size, channels)), 0.0, 1.0)
        image = np.where(mask[:, :, None], obj, background)
        examples.append(
            ImageExample(image=image, label=label, object_mask=mask.astype(np.float64), background_id=bg_id)
        )

    record = {
        "op": "gen_shapes",
        "seed": int(seed),
        "n": int(n),
        "classes": int(classes),
        "image_size": int(image_size),
        "channels": int(channels),
        "split": split,
        "shape_offset": int(shape_offset),
        "radius_range": [float(radius_range[0]), float(radius_range[1])],
    }
    return LabeledDataset(examples, classes, split, [record])
