"""Attribution comparison metrics.

Conventions:
  * Unsigned normalization collapses channels by summing absolute values
    and affinely rescales to [0, 1]; a constant map becomes all zeros.
  * Signed normalization divides by the largest magnitude, giving [-1, 1].
  * SSIM runs on unsigned maps with the canonical parameters: 11x11
    Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03, dynamic range 1.0,
    valid window positions only, weighted (not sample) covariances.
  * Spearman rank correlation uses average ranks on ties and returns None
    when either side has no rank variation.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .tensor import as_tensor

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass
class NormalizedMap:
    values: np.ndarray
    method: str = ""
    mode: str = "unsigned"  # or "signed"


@dataclass
class ScoreSummary:
    metric: str
    scores: list
    mean: float
    sem: float
    n: int


def normalize(values, mode: str = "unsigned", method: str = "") -> NormalizedMap:
    """Rescale an attribution for comparison; see module conventions."""
    arr = as_tensor(getattr(values, "values", values), "attribution")
    if mode == "unsigned":
        flat = np.abs(arr)
        if flat.ndim == 3:
            flat = flat.sum(axis=2)
        elif flat.ndim != 2 and flat.ndim != 1:
            raise ValueError(f"expected 1-3 dims, got {arr.ndim}")
        lo, hi = flat.min(), flat.max()
        out = np.zeros_like(flat) if hi - lo == 0 else (flat - lo) / (hi - lo)
    elif mode == "signed":
        peak = np.abs(arr).max()
        out = np.zeros_like(arr) if peak == 0 or arr.min() == arr.max() else arr / peak
    else:
        raise ValueError(f"mode must be 'unsigned' or 'signed', got {mode!r}")
    return NormalizedMap(values=out, method=method, mode=mode)


def _gaussian_window(size, sigma):
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g1 = np.exp(-(coords**2) / (2.0 * sigma**2))
    win = np.outer(g1, g1)
    return win / win.sum()


def _windowed(values, kernel):
    size = kernel.shape[0]
    win = np.lib.stride_tricks.sliding_window_view(values, (size, size))
    return np.tensordot(win, kernel, axes=([2, 3], [0, 1]))


def ssim(a: NormalizedMap, b: NormalizedMap) -> float:
    """Mean structural similarity between two unsigned normalized maps."""
    for m in (a, b):
        if m.mode != "unsigned":
            raise ValueError("ssim compares unsigned normalized maps")
    x, y = a.values, b.values
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    c1 = (SSIM_K1 * 1.0) ** 2
    c2 = (SSIM_K2 * 1.0) ** 2
    if min(x.shape) < SSIM_WINDOW:
        warnings.warn("map smaller than the SSIM window; falling back to global statistics")
        mx, my = x.mean(), y.mean()
        vx, vy = x.var(), y.var()
        cov = ((x - mx) * (y - my)).mean()
        return float(((2 * mx * my + c1) * (2 * cov + c2)) / ((mx**2 + my**2 + c1) * (vx + vy + c2)))

    kernel = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
    mx = _windowed(x, kernel)
    my = _windowed(y, kernel)
    mxx = _windowed(x * x, kernel)
    myy = _windowed(y * y, kernel)
    mxy = _windowed(x * y, kernel)
    vx = mxx - mx * mx
    vy = myy - my * my
    cov = mxy - mx * my
    ssim_map = ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
    return float(ssim_map.mean())


def _average_ranks(v):
    order = np.argsort(v, kind="stable")
    sv = v[order]
    boundaries = np.flatnonzero(np.r_[True, sv[1:] != sv[:-1], True])
    ranks_sorted = np.empty(len(v))
    for start, end in zip(boundaries[:-1], boundaries[1:]):
        ranks_sorted[start:end] = 0.5 * (start + end - 1) + 1.0  # average of 1-based positions
    ranks = np.empty(len(v))
    ranks[order] = ranks_sorted
    return ranks


def spearman(a, b, use_abs: bool = False):
    """Rank correlation of two flattened maps; None when undefined."""
    x = as_tensor(getattr(a, "values", a), "a").ravel()
    y = as_tensor(getattr(b, "values", b), "b").ravel()
    if x.size != y.size:
        raise ValueError(f"element count mismatch: {x.size} vs {y.size}")
    if x.size < 2:
        raise ValueError("need at least 2 elements")
    if use_abs:
        x, y = np.abs(x), np.abs(y)
    rx = _average_ranks(x)
    ry = _average_ranks(y)
    sx, sy = rx.std(), ry.std()
    if sx == 0 or sy == 0:
        return None
    return float(((rx - rx.mean()) * (ry - ry.mean())).mean() / (sx * sy))


def norm_diff(e_orig, e_rand) -> float:
    """Relative change ||orig - other||_2 / ||orig||_2."""
    x = as_tensor(getattr(e_orig, "values", e_orig), "e_orig").ravel()
    y = as_tensor(getattr(e_rand, "values", e_rand), "e_rand").ravel()
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    denom = np.linalg.norm(x)
    if denom == 0:
        raise ValueError("original map has zero norm")
    return float(np.linalg.norm(x - y) / denom)


def gt2_mask(gt1: np.ndarray, background_attr: NormalizedMap) -> NormalizedMap:
    """Background mask weighted by an object-free background attribution."""
    gt1 = as_tensor(gt1, "gt1")
    if background_attr.mode != "unsigned":
        raise ValueError("gt2 weighting expects an unsigned normalized map")
    if gt1.shape != background_attr.values.shape:
        raise ValueError(f"shape mismatch: {gt1.shape} vs {background_attr.values.shape}")
    return NormalizedMap(values=gt1 * background_attr.values, method=background_attr.method, mode="unsigned")


def summarize(metric: str, scores) -> ScoreSummary:
    """Mean and standard error of the mean over per-input scores."""
    vals = [float(s) for s in scores]
    n = len(vals)
    if n < 2:
        raise ValueError("need at least 2 scores to summarize")
    arr = np.array(vals)
    return ScoreSummary(
        metric=metric,
        scores=vals,
        mean=float(arr.mean()),
        sem=float(arr.std(ddof=1) / np.sqrt(n)),
        n=n,
    )
