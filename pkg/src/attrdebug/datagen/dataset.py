"""Dataset containers with mutation provenance.

Every operation that creates or transforms a dataset appends a record to
`provenance`; replaying those records from scratch reproduces the dataset
bit-for-bit, which the tests rely on.

Serialized container layout (datasets are cacheable to disk):
    bytes 0-3    magic b"ADDS"
    bytes 4-7    version, uint32 little-endian (currently 1)
    bytes 8-11   header length L, uint32 little-endian
    bytes 12..   L bytes UTF-8 JSON header (counts, shapes, provenance)
    remainder    images as float64 LE, masks as uint8, labels as int64 LE,
                 background ids as int64 LE (-1 when absent)
"""

import json
import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"ADDS"
VERSION = 1

SPLITS = ("train", "val", "test")


class DatasetFormatError(ValueError):
    pass


@dataclass
class ImageExample:
    image: np.ndarray  # (H, W, C) float64 in [0, 1]
    label: int
    object_mask: np.ndarray  # (H, W) float64 binary, 1 = object pixel
    background_id: int | None = None

    def validate(self, class_count):
        if self.object_mask.shape != self.image.shape[:2]:
            raise ValueError("mask shape does not match image spatial dims")
        if not 0 <= self.label < class_count:
            raise ValueError(f"label {self.label} out of range for {class_count} classes")


@dataclass
class LabeledDataset:
    examples: list
    class_count: int
    split: str
    provenance: list = field(default_factory=list)

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}, got {self.split!r}")
        for ex in self.examples:
            ex.validate(self.class_count)
        self._images = None
        self._labels = None

    def __len__(self):
        return len(self.examples)

    def images_array(self):
        if self._images is None:
            self._images = np.stack([ex.image for ex in self.examples])
        return self._images

    def labels_array(self):
        if self._labels is None:
            self._labels = np.array([ex.label for ex in self.examples], dtype=np.int64)
        return self._labels

    @property
    def image_shape(self):
        return self.examples[0].image.shape

    def with_examples(self, examples, record):
        """Derived dataset with one more provenance record appended."""
        return LabeledDataset(examples, self.class_count, self.split, self.provenance + [record])


def gt1_mask(ex: ImageExample) -> np.ndarray:
    """Ideal relevance target for a background confound: 1 off-object."""
    if ex.object_mask is None:
        raise ValueError("example carries no object mask")
    return 1.0 - ex.object_mask


def datasets_equal(a: LabeledDataset, b: LabeledDataset) -> bool:
    if len(a) != len(b) or a.class_count != b.class_count or a.split != b.split:
        return False
    for ea, eb in zip(a.examples, b.examples):
        if ea.label != eb.label or ea.background_id != eb.background_id:
            return False
        if not np.array_equal(ea.image, eb.image) or not np.array_equal(ea.object_mask, eb.object_mask):
            return False
    return True


def save_dataset(ds: LabeledDataset, path) -> None:
    h, w, c = ds.image_shape
    header = {
        "n": len(ds),
        "class_count": ds.class_count,
        "split": ds.split,
        "image_shape": [h, w, c],
        "provenance": ds.provenance,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    images = np.stack([ex.image for ex in ds.examples]).astype("<f8")
    masks = np.stack([ex.object_mask for ex in ds.examples]).astype(np.uint8)
    labels = np.array([ex.label for ex in ds.examples], dtype="<i8")
    bgids = np.array(
        [-1 if ex.background_id is None else ex.background_id for ex in ds.examples], dtype="<i8"
    )
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(blob)))
        fh.write(blob)
        fh.write(images.tobytes())
        fh.write(masks.tobytes())
        fh.write(labels.tobytes())
        fh.write(bgids.tobytes())


def load_dataset(path) -> LabeledDataset:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise DatasetFormatError(f"bad magic {data[:4]!r}, expected {MAGIC!r}")
    version, hlen = struct.unpack("<II", data[4:12])
    if version != VERSION:
        raise DatasetFormatError(f"unsupported dataset version {version}")
    header = json.loads(data[12 : 12 + hlen].decode("utf-8"))
    n = header["n"]
    h, w, c = header["image_shape"]
    offset = 12 + hlen
    img_bytes = n * h * w * c * 8
    mask_bytes = n * h * w
    expected = img_bytes + mask_bytes + n * 8 + n * 8
    if len(data) - offset != expected:
        raise DatasetFormatError(f"truncated payload: expected {expected} bytes, got {len(data) - offset}")
    images = np.frombuffer(data, dtype="<f8", count=n * h * w * c, offset=offset).reshape(n, h, w, c)
    offset += img_bytes
    masks = np.frombuffer(data, dtype=np.uint8, count=n * h * w, offset=offset).reshape(n, h, w)
    offset += mask_bytes
    labels = np.frombuffer(data, dtype="<i8", count=n, offset=offset)
    offset += n * 8
    bgids = np.frombuffer(data, dtype="<i8", count=n, offset=offset)
    examples = [
        ImageExample(
            image=images[i].astype(np.float64),
            label=int(labels[i]),
            object_mask=masks[i].astype(np.float64),
            background_id=None if bgids[i] < 0 else int(bgids[i]),
        )
        for i in range(n)
    ]
    return LabeledDataset(examples, header["class_count"], header["split"], header["provenance"])
