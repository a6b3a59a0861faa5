"""IDX binary dataset ingestion (big-endian header, ubyte payload).

Images file: magic 0x00000803, then counts/rows/cols as big-endian
uint32, then row-major ubyte pixels. Labels file: magic 0x00000801,
count, then ubyte labels. Pixels are scaled to [0, 1]; grayscale can be
replicated to a requested channel count.
"""

import struct

import numpy as np

from .dataset import ImageExample, LabeledDataset

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


class IdxFormatError(ValueError):
    pass


def _read_exact(data, offset, count, what, path):
    if len(data) < offset + count:
        raise IdxFormatError(
            f"{path}: truncated {what}: expected {offset + count} bytes, file has {len(data)}"
        )
    return data[offset : offset + count]


def load_idx(images_path, labels_path, channels: int = 1, split: str = "train", class_count=None) -> LabeledDataset:
    """Parse an IDX image/label file pair bit-exactly."""
    with open(images_path, "rb") as fh:
        img_data = fh.read()
    with open(labels_path, "rb") as fh:
        lab_data = fh.read()

    header = _read_exact(img_data, 0, 16, "image header", images_path)
    magic, n_images, rows, cols = struct.unpack(">IIII", header)
    if magic != IMAGES_MAGIC:
        raise IdxFormatError(f"{images_path}: bad magic 0x{magic:08x}, expected 0x{IMAGES_MAGIC:08x}")
    pixels = _read_exact(img_data, 16, n_images * rows * cols, "pixel payload", images_path)

    lheader = _read_exact(lab_data, 0, 8, "label header", labels_path)
    lmagic, n_labels = struct.unpack(">II", lheader)
    if lmagic != LABELS_MAGIC:
        raise IdxFormatError(f"{labels_path}: bad magic 0x{lmagic:08x}, expected 0x{LABELS_MAGIC:08x}")
    if n_labels != n_images:
        raise IdxFormatError(f"count mismatch: {n_images} images vs {n_labels} labels")
    labels = np.frombuffer(_read_exact(lab_data, 8, n_labels, "label payload", labels_path), dtype=np.uint8)

    raw = np.frombuffer(pixels, dtype=np.uint8).reshape(n_images, rows, cols)
    images = raw.astype(np.float64) / 255.0
    if channels < 1:
        raise ValueError("channels must be >= 1")
    classes = int(class_count) if class_count is not None else int(labels.max()) + 1
    ones = np.ones((rows, cols))
    examples = [
        ImageExample(
            image=np.repeat(images[i][:, :, None], channels, axis=2),
            label=int(labels[i]),
            object_mask=ones.copy(),
            background_id=None,
        )
        for i in range(n_images)
    ]
    record = {
        "op": "load_idx",
        "images_path": str(images_path),
        "labels_path": str(labels_path),
        "channels": int(channels),
        "split": split,
        "class_count": classes,
    }
    return LabeledDataset(examples, classes, split, [record])


def write_idx(images_u8: np.ndarray, labels_u8: np.ndarray, images_path, labels_path) -> None:
    """Emit an IDX pair from (n, rows, cols) uint8 pixels and uint8 labels."""
    images_u8 = np.asarray(images_u8, dtype=np.uint8)
    labels_u8 = np.asarray(labels_u8, dtype=np.uint8)
    if images_u8.ndim != 3:
        raise ValueError("images must be (n, rows, cols) uint8")
    n, rows, cols = images_u8.shape
    if labels_u8.shape != (n,):
        raise ValueError(f"labels must be ({n},), got {labels_u8.shape}")
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IMAGES_MAGIC, n, rows, cols))
        fh.write(images_u8.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", LABELS_MAGIC, n))
        fh.write(labels_u8.tobytes())
