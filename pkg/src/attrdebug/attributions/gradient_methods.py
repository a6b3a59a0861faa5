"""Gradient-based attribution methods.

All functions are pure in (network, input, class, hyperparameters): the
network and input are never modified, and stochastic methods derive
their noise seed from the input bytes unless an explicit seed is given.
"""

import numpy as np

from ..nn.network import Network, backward_gradient
from ..tensor import as_tensor
from .maps import AttributionMap, derive_seed


def _single_gradient(net, x, class_index, target):
    trace = net.forward(x)
    return backward_gradient(net, trace, class_index, target=target)


def grad(net: Network, x, class_index: int, target: str = "logit") -> AttributionMap:
    """Absolute input gradient of the class target."""
    x = as_tensor(x, "input")
    g = np.abs(_single_gradient(net, x, class_index, target))
    return AttributionMap(g, "grad", {"target": target}, class_index, signed=False)


def smoothgrad_family(
    net: Network,
    x,
    class_index: int,
    variant: str = "mean",
    n_samples: int = 50,
    sigma_fraction: float = 0.15,
    target: str = "logit",
    seed=None,
) -> AttributionMap:
    """Noise-averaged gradients: mean, squared mean, or variance.

    The noise scale is sigma_fraction * (max(x) - min(x)). All variants
    share one noise stream for a given (input, n_samples, sigma_fraction),
    so the squared variant is exactly the square of the mean variant.
    """
    if variant not in ("mean", "square", "variance"):
        raise ValueError(f"variant must be mean/square/variance, got {variant!r}")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    x = as_tensor(x, "input")
    sigma = sigma_fraction * (x.max() - x.min())
    if sigma == 0.0:
        # all perturbed points coincide with x: the plain gradient is the
        # exact mean and the sample variance is exactly zero
        mean = _batched_input_gradients(net, x[None], class_index, target)[0]
        grads = None
    else:
        if seed is None:
            seed = derive_seed(x, "smoothgrad", n_samples, sigma_fraction)
        rng = np.random.default_rng(np.random.SeedSequence([seed & 0x7FFFFFFFFFFFFFFF]))
        noise = rng.normal(0.0, 1.0, size=(n_samples,) + x.shape) * sigma
        grads = _batched_input_gradients(net, x[None] + noise, class_index, target)
        mean = grads.mean(axis=0)
    if variant == "mean":
        values, signed, method = mean, True, "smoothgrad"
    elif variant == "square":
        values, signed, method = mean * mean, False, "smoothgrad_sq"
    else:
        var = np.zeros_like(mean) if grads is None else grads.var(axis=0)
        values, signed, method = var, False, "vargrad"
    params = {"variant": variant, "n_samples": n_samples, "sigma_fraction": sigma_fraction, "target": target}
    return AttributionMap(values, method, params, class_index, signed=signed)


def _batched_input_gradients(net, xs, class_index, target, chunk=256):
    parts = []
    for start in range(0, len(xs), chunk):
        trace = net.forward_batch(xs[start : start + chunk])
        parts.append(backward_gradient(net, trace, class_index, target=target))
    return np.concatenate(parts, axis=0)


def input_times_grad(net: Network, x, class_index: int, target: str = "logit") -> AttributionMap:
    """Elementwise product of the absolute gradient and the input."""
    x = as_tensor(x, "input")
    g = np.abs(_single_gradient(net, x, class_index, target))
    return AttributionMap(g * x, "input_x_grad", {"target": target}, class_index, signed=True)


def integrated_gradients(
    net: Network, x, class_index: int, baseline=None, steps: int = 50, target: str = "logit"
) -> AttributionMap:
    """Path-integrated gradients with a midpoint Riemann sum.

    The default baseline is the input's minimum value broadcast over all
    dimensions (an all-dark image for [0, 1] pixel data).
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    x = as_tensor(x, "input")
    baseline = np.full_like(x, x.min()) if baseline is None else as_tensor(baseline, "baseline")
    if baseline.shape != x.shape:
        raise ValueError(f"baseline shape {baseline.shape} does not match input {x.shape}")
    alphas = (np.arange(steps) + 0.5) / steps
    points = baseline[None] + alphas.reshape((-1,) + (1,) * x.ndim) * (x - baseline)[None]
    grads = _batched_input_gradients(net, points, class_index, target)
    values = (x - baseline) * grads.mean(axis=0)
    params = {"steps": steps, "target": target}
    return AttributionMap(values, "intgrad", params, class_index, signed=True)


def expected_gradients(
    net: Network, x, class_index: int, baseline_set, steps: int = 50, target: str = "logit"
) -> AttributionMap:
    """Integrated gradients averaged over a set of baseline inputs."""
    baselines = as_tensor(baseline_set, "baseline set")
    if baselines.ndim == len(net.input_shape):
        baselines = baselines[None]
    if baselines.shape[0] == 0:
        raise ValueError("baseline set is empty")
    acc = None
    for b in baselines:
        m = integrated_gradients(net, x, class_index, baseline=b, steps=steps, target=target)
        acc = m.values if acc is None else acc + m.values
    values = acc / baselines.shape[0]
    params = {"steps": steps, "baseline_count": int(baselines.shape[0]), "target": target}
    return AttributionMap(values, "expected_grad", params, class_index, signed=True)
