"""Surrogate-model attributions over a rectangular segment grid.

Images are partitioned into near-square rectangular tiles; perturbed
samples replace dropped tiles with the image's mean color. LIME fits a
kernel-weighted ridge regression on the keep/drop mask bits; KernelSHAP
solves the Shapley-kernel weighted least squares with the empty and full
coalitions pinned, so the attributions sum to f(x) - f(mean image).

Both accept a Network or any callable mapping an image batch to scores,
which lets tests plant analytically known signal.
"""

import numpy as np

from ..nn.network import Network
from ..tensor import as_tensor
from .maps import AttributionMap, derive_seed


def segment_grid(height: int, width: int, segments: int) -> np.ndarray:
    """Label map (H, W) splitting the image into `segments` rectangles."""
    if segments < 1:
        raise ValueError("segments must be >= 1")
    if segments > height * width:
        raise ValueError("more segments than pixels")
    best = None
    for rows in range(1, segments + 1):
        if segments % rows:
            continue
        cols = segments // rows
        if rows <= height and cols <= width:
            score = abs(rows - cols)
            if best is None or score < best[0]:
                best = (score, rows, cols)
    if best is None:
        raise ValueError(f"cannot tile {height}x{width} into {segments} rectangles")
    _, rows, cols = best
    labels = np.zeros((height, width), dtype=int)
    row_edges = np.array_split(np.arange(height), rows)
    col_edges = np.array_split(np.arange(width), cols)
    seg = 0
    for rblock in row_edges:
        for cblock in col_edges:
            labels[np.ix_(rblock, cblock)] = seg
            seg += 1
    return labels


def _score_fn(model, class_index, target):
    if isinstance(model, Network):
        def score(images):
            trace = model.forward_batch(images)
            out = trace.logits if target == "logit" else trace.scores
            return out[:, class_index]

        return score
    if callable(model):
        return model
    raise TypeError("model must be a Network or a callable")


def _masked_scores(score, x, label_map, masks, chunk=256):
    mean_color = x.mean(axis=(0, 1))
    out = np.empty(len(masks))
    for start in range(0, len(masks), chunk):
        block = masks[start : start + chunk]
        keep = block[:, label_map]  # (chunk, H, W) of 0/1
        images = np.where(keep[..., None] > 0, x[None], mean_color)
        out[start : start + chunk] = score(images)
    return out


def _broadcast_to_pixels(coeffs, label_map, channels):
    plane = coeffs[label_map]
    return np.repeat(plane[:, :, None], channels, axis=2)


def lime(
    model,
    x,
    class_index: int,
    segments: int = 50,
    num_samples: int = 1000,
    kernel_width: float = 0.25,
    ridge_lambda: float = 1.0,
    seed: int = 0,
    target: str = "logit",
) -> AttributionMap:
    """Local ridge surrogate on segment keep/drop bits."""
    x = as_tensor(x, "input")
    h, w, c = x.shape
    label_map = segment_grid(h, w, segments)
    s = segments
    if num_samples < s:
        raise ValueError("num_samples must be >= segment count")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), derive_seed(x, "lime"), 3]))
    masks = rng.integers(0, 2, size=(num_samples, s))
    masks[0, :] = 1  # keep the unperturbed instance in the sample

    score = _score_fn(model, class_index, target)
    y = _masked_scores(score, x, label_map, masks)

    # cosine distance between binary masks and the all-ones mask
    kept = masks.sum(axis=1)
    dist = np.where(kept > 0, 1.0 - np.sqrt(kept / s), 1.0)
    weights = np.exp(-(dist**2) / kernel_width**2)

    design = np.column_stack([np.ones(num_samples), masks.astype(np.float64)])
    wd = design * weights[:, None]
    gram = design.T @ wd
    penalty = np.eye(s + 1) * ridge_lambda
    penalty[0, 0] = 0.0  # intercept unregularized
    coeffs = np.linalg.solve(gram + penalty, wd.T @ y)
    seg_weights = coeffs[1:]

    params = {
        "segments": segments,
        "num_samples": num_samples,
        "kernel_width": kernel_width,
        "ridge_lambda": ridge_lambda,
        "seed": seed,
        "target": target,
    }
    return AttributionMap(_broadcast_to_pixels(seg_weights, label_map, c), "lime", params, class_index, signed=True)


def _shapley_kernel(s, size):
    if size == 0 or size == s:
        return np.inf
    from math import comb

    return (s - 1) / (comb(s, size) * size * (s - size))


def _all_coalitions(s):
    masks = np.zeros((2**s - 2, s), dtype=np.int64)
    row = 0
    for bits in range(1, 2**s - 1):
        for j in range(s):
            masks[row, j] = (bits >> j) & 1
        row += 1
    return masks


def kernel_shap(
    model,
    x,
    class_index: int,
    segments: int = 50,
    num_samples: int = 1000,
    seed: int = 0,
    target: str = "logit",
) -> AttributionMap:
    """Shapley-kernel weighted least squares over masked segment games.

    When every proper coalition fits in the sample budget the regression
    enumerates all of them, which recovers exact Shapley values.
    """
    x = as_tensor(x, "input")
    h, w, c = x.shape
    label_map = segment_grid(h, w, segments)
    s = segments
    if num_samples < s:
        raise ValueError("num_samples must be >= segment count")
    score = _score_fn(model, class_index, target)

    exhaustive = s <= 20 and 2**s - 2 <= num_samples
    if exhaustive:
        masks = _all_coalitions(s)
        weights = np.array([_shapley_kernel(s, int(m.sum())) for m in masks])
    else:
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), derive_seed(x, "kernel_shap"), 5]))
        sizes = np.arange(1, s)
        size_p = (s - 1) / (sizes * (s - sizes))
        size_p /= size_p.sum()
        masks = np.zeros((num_samples, s), dtype=np.int64)
        draw = rng.choice(sizes, size=num_samples, p=size_p)
        for i, k in enumerate(draw):
            masks[i, rng.choice(s, size=int(k), replace=False)] = 1
        # sampling already follows the kernel distribution over sizes
        weights = np.ones(num_samples)

    v = _masked_scores(score, x, label_map, masks)
    v_empty = float(_masked_scores(score, x, label_map, np.zeros((1, s), dtype=np.int64))[0])
    v_full = float(_masked_scores(score, x, label_map, np.ones((1, s), dtype=np.int64))[0])
    total = v_full - v_empty

    # eliminate the last coefficient with the additivity constraint:
    # phi_s = total - sum(phi_1..s-1)
    z = masks.astype(np.float64)
    design = z[:, :-1] - z[:, -1:]
    yvec = v - v_empty - z[:, -1] * total
    wd = design * weights[:, None]
    gram = design.T @ wd
    gram += np.eye(s - 1) * 1e-10  # numerical guard for near-singular samples
    phi_head = np.linalg.solve(gram, wd.T @ yvec)
    phi = np.concatenate([phi_head, [total - phi_head.sum()]])

    params = {"segments": segments, "num_samples": num_samples, "seed": seed, "target": target}
    return AttributionMap(_broadcast_to_pixels(phi, label_map, c), "kernel_shap", params, class_index, signed=True)
