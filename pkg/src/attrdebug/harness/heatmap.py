"""Heatmap export as binary PGM/PPM.

Grayscale maps become P5 (maxval 255); the white-red palette becomes P6
with value v mapped to (255, 255*(1-v), 255*(1-v)), so 0 is white and 1
is pure red. Values are expected in [0, 1] (unsigned normalized maps).
"""

import numpy as np

PALETTES = ("grayscale", "white-red")


def export_heatmap(nmap, path, palette: str = "grayscale") -> None:
    values = np.asarray(getattr(nmap, "values", nmap), dtype=np.float64)
    if values.ndim != 2:
        raise ValueError(f"heatmaps take 2-D maps, got shape {values.shape}")
    if values.min() < 0.0 or values.max() > 1.0:
        raise ValueError("heatmap values must lie in [0, 1]; normalize first")
    h, w = values.shape
    quant = np.round(values * 255.0).astype(np.uint8)
    if palette == "grayscale":
        header = f"P5\n{w} {h}\n255\n".encode("ascii")
        body = quant.tobytes()
    elif palette == "white-red":
        header = f"P6\n{w} {h}\n255\n".encode("ascii")
        other = np.round((1.0 - values) * 255.0).astype(np.uint8)
        rgb = np.stack([np.full((h, w), 255, dtype=np.uint8), other, other], axis=2)
        body = rgb.tobytes()
    else:
        raise ValueError(f"palette must be one of {PALETTES}, got {palette!r}")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body)


def read_pgm(path) -> np.ndarray:
    """Read back a P5 file as floats in [0, 1] (round-trip checks)."""
    with open(path, "rb") as fh:
        data = fh.read()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError(f"not a binary PGM: {parts[0]!r}")
    w, h = (int(t) for t in parts[1].split())
    maxval = int(parts[2])
    pixels = np.frombuffer(parts[3], dtype=np.uint8, count=h * w).reshape(h, w)
    return pixels.astype(np.float64) / maxval
