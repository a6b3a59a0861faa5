"""Relevance-propagation attributions (LRP rules, GBP, DConvNet).

Relevance starts at the target logit and flows down layer by layer:

  * z rule:     r_i = sum_j z_ij / (sum_i' z_i'j + b_j) * r_j
  * eps rule:   as z, with the denominator stabilized by eps * sign
  * alpha-beta: r_i = sum_j (alpha * z+_ij / d+_j - beta * z-_ij / d-_j) r_j
                where z+/z- split positive/negative contributions and the
                bias joins the matching denominator
  * flat rule:  every unit redistributes its relevance uniformly over the
                inputs in its receptive field

The composite preset applies flat at the first parameterized layer,
alpha-beta(1, 0) at the remaining conv layers, and eps at dense layers.
ReLU passes relevance through; max-pool routes it along the gradient
path (winner take all); flatten reshapes.

GBP and DConvNet reuse the plain gradient walk with modified ReLU gates
(see ReLU.input_grad) and are exposed here as modified_backprop.
"""

import numpy as np

from ..nn.layers import Conv2D, Dense, Flatten, MaxPool2D, ReLU, _conv_patches, _conv_scatter
from ..nn.network import Network, backward_gradient
from ..tensor import as_tensor, check_finite
from .maps import AttributionMap

_SUPPORTED_HIDDEN = (Dense, Conv2D, ReLU, MaxPool2D, Flatten)

LRP_RULES = ("z", "eps", "alphabeta", "composite_flat")


def _check_supported(net, op_name):
    for i, layer in enumerate(net.layers[:-1]):
        if not isinstance(layer, _SUPPORTED_HIDDEN):
            raise ValueError(f"{op_name} does not support layer {i} ({type(layer).__name__})")


def _sign_nonzero(z):
    return np.where(z >= 0, 1.0, -1.0)


def _safe(denom):
    return np.where(denom == 0.0, 1.0, denom)


def _dense_relevance(layer, x, r, rule, eps, alpha, beta):
    weights, bias = layer.weights, layer.bias
    if rule in ("z", "eps"):
        z = x @ weights + bias
        if rule == "z":
            if np.any(np.abs(z) < 1e-12):
                raise ZeroDivisionError("z rule denominator vanished at a dense layer; use the eps rule")
            denom = z
        else:
            denom = z + eps * _sign_nonzero(z)
        return x * ((r / denom) @ weights.T)
    if rule == "alphabeta":
        contrib = x[:, :, None] * weights[None, :, :]
        pos = np.maximum(contrib, 0.0)
        neg = np.minimum(contrib, 0.0)
        dpos = _safe(pos.sum(axis=1) + np.maximum(bias, 0.0))
        dneg = _safe(neg.sum(axis=1) + np.minimum(bias, 0.0))
        msg = alpha * pos / dpos[:, None, :] - beta * neg / dneg[:, None, :]
        return np.einsum("nij,nj->ni", msg, r)
    if rule == "flat":
        return np.repeat((r.sum(axis=1) / layer.d_in)[:, None], layer.d_in, axis=1)
    raise ValueError(f"unknown dense rule {rule!r}")


def _conv_relevance(layer, x, r, rule, eps, alpha, beta):
    n, h, w, c = x.shape
    p = layer.padding
    patches = _conv_patches(layer._pad(x), layer.kh, layer.kw, layer.stride)
    nb, ho, wo = patches.shape[:3]
    flat = patches.reshape(nb, ho, wo, -1)
    kmat = layer._kernel_matrix()

    if rule in ("z", "eps"):
        z = flat @ kmat + layer.bias
        if rule == "z":
            if np.any(np.abs(z) < 1e-12):
                raise ZeroDivisionError("z rule denominator vanished at a conv layer; use the eps rule")
            denom = z
        else:
            denom = z + eps * _sign_nonzero(z)
        dflat = ((r / denom) @ kmat.T) * flat
    elif rule == "alphabeta":
        contrib = flat[..., :, None] * kmat[None, None, None, :, :]
        pos = np.maximum(contrib, 0.0)
        neg = np.minimum(contrib, 0.0)
        dpos = _safe(pos.sum(axis=3) + np.maximum(layer.bias, 0.0))
        dneg = _safe(neg.sum(axis=3) + np.minimum(layer.bias, 0.0))
        msg = alpha * pos / dpos[..., None, :] - beta * neg / dneg[..., None, :]
        dflat = np.einsum("nhwif,nhwf->nhwi", msg, r)
    elif rule == "flat":
        share = r.sum(axis=3) / kmat.shape[0]
        dflat = np.repeat(share[..., None], kmat.shape[0], axis=3)
    else:
        raise ValueError(f"unknown conv rule {rule!r}")

    dpatches = dflat.reshape(nb, ho, wo, layer.kh, layer.kw, layer.c_in)
    dxp = _conv_scatter(dpatches, n, h + 2 * p, w + 2 * p, c, layer.stride)
    return dxp[:, p : p + h, p : p + w, :] if p else dxp


def _initial_relevance(net, trace, class_index):
    head_input = trace.layer_inputs[-1]
    logits = net.output_layer.logits(head_input)
    if head_input.shape[1] == logits.shape[1]:
        r = np.zeros_like(head_input)
        r[:, class_index] = logits[:, class_index]
        return r
    # sigmoid head: the single pre-activation carries the class logit
    return logits[:, class_index : class_index + 1].copy()


def lrp(
    net: Network,
    x,
    class_index: int,
    rule: str = "eps",
    eps: float = 1e-6,
    alpha: float = 1.0,
    beta: float = 0.0,
) -> AttributionMap:
    """Layer-wise relevance propagation from the target logit to the input."""
    if rule not in LRP_RULES:
        raise ValueError(f"rule must be one of {LRP_RULES}, got {rule!r}")
    if rule == "alphabeta" and abs(alpha - beta - 1.0) > 1e-12:
        raise ValueError("alpha - beta must equal 1")
    _check_supported(net, "lrp")
    x = as_tensor(x, "input")
    trace = net.forward(x)
    if not 0 <= class_index < net.class_count:
        raise IndexError(f"class index {class_index} out of range")

    first_param = net.parameterized_indices[0]
    r = _initial_relevance(net, trace, class_index)
    for i in range(len(net.layers) - 2, -1, -1):
        layer = net.layers[i]
        xin = trace.layer_inputs[i]
        if isinstance(layer, ReLU):
            continue
        if isinstance(layer, Flatten):
            r = r.reshape(xin.shape)
            continue
        if isinstance(layer, MaxPool2D):
            r = layer.route_upstream(xin, r)
            continue
        if rule == "composite_flat":
            layer_rule = "flat" if i == first_param else ("alphabeta" if isinstance(layer, Conv2D) else "eps")
        else:
            layer_rule = rule
        if isinstance(layer, Dense):
            r = _dense_relevance(layer, xin, r, layer_rule, eps, alpha, beta)
        else:
            r = _conv_relevance(layer, xin, r, layer_rule, eps, alpha, beta)
    values = check_finite(r[0], "relevance")

    method = {"z": "lrp_z", "eps": "lrp_eps", "alphabeta": "lrp_ab", "composite_flat": "lrp_flat"}[rule]
    params = {"rule": rule, "eps": eps, "alpha": alpha, "beta": beta}
    return AttributionMap(values, method, params, class_index, signed=True)


def modified_backprop(net: Network, x, class_index: int, rule: str, target: str = "logit") -> AttributionMap:
    """Gradient walk with a modified ReLU backward gate (gbp/deconvnet)."""
    if rule not in ("gbp", "deconvnet"):
        raise ValueError(f"rule must be 'gbp' or 'deconvnet', got {rule!r}")
    _check_supported(net, rule)
    x = as_tensor(x, "input")
    trace = net.forward(x)
    g = backward_gradient(net, trace, class_index, target=target, relu_rule=rule)
    return AttributionMap(g, rule, {"target": target}, class_index, signed=True)
