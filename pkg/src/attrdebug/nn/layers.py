"""Layer zoo for the sequential network engine.

Each layer implements a batched forward pass plus explicit backward
functions that take the forward input as an argument, so gradient and
relevance walks can run from a recorded trace without touching layer
state. Layers still cache their last forward input/pre-activation, which
the training loop and the cache invariants rely on.

All activations are channels-last: images are (N, H, W, C), flat vectors
are (N, D).
"""

import numpy as np

from ..tensor import Tensor


class ShapeMismatch(ValueError):
    """Input shape incompatible with a layer, carrying the layer index."""

    def __init__(self, layer_index, message):
        super().__init__(f"layer {layer_index}: {message}")
        self.layer_index = layer_index


# small positive bias keeps ReLU units alive under all-positive image inputs
BIAS_INIT = 0.01


def _glorot_uniform(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    """Base class: parameter-free, shape-preserving by default."""

    def __init__(self):
        self.last_input = None
        self.last_preact = None

    @property
    def has_params(self):
        return False

    def out_shape(self, in_shape):
        return tuple(in_shape)

    def forward(self, x: Tensor) -> Tensor:
        raise NotImplementedError

    def input_grad(self, x: Tensor, dy: Tensor, relu_rule=None) -> Tensor:
        """Gradient wrt the layer input given upstream gradient dy."""
        raise NotImplementedError

    def param_grads(self, x: Tensor, dy: Tensor) -> dict:
        return {}

    def param_arrays(self) -> dict:
        return {}

    def set_param_arrays(self, params: dict) -> None:
        if params:
            raise ValueError(f"{type(self).__name__} takes no parameters")

    def init_params(self, rng) -> None:
        pass

    def clear_cache(self) -> None:
        self.last_input = None
        self.last_preact = None

    def descriptor(self) -> dict:
        return {"type": type(self).__name__}


class Dense(Layer):
    """Affine layer: y = x @ weights + bias, weights (d_in, d_out)."""

    def __init__(self, d_in, d_out):
        super().__init__()
        self.d_in = int(d_in)
        self.d_out = int(d_out)
        self.weights = np.zeros((self.d_in, self.d_out))
        self.bias = np.zeros(self.d_out)

    @property
    def has_params(self):
        return True

    def out_shape(self, in_shape):
        if len(in_shape) != 1 or in_shape[0] != self.d_in:
            raise ValueError(f"Dense expects ({self.d_in},), got {in_shape}")
        return (self.d_out,)

    def forward(self, x):
        y = x @ self.weights + self.bias
        self.last_input = x
        self.last_preact = y
        return y

    def input_grad(self, x, dy, relu_rule=None):
        return dy @ self.weights.T

    def param_grads(self, x, dy):
        return {"weights": x.T @ dy, "bias": dy.sum(axis=0)}

    def param_arrays(self):
        return {"weights": self.weights, "bias": self.bias}

    def set_param_arrays(self, params):
        w, b = params["weights"], params["bias"]
        if w.shape != self.weights.shape or b.shape != self.bias.shape:
            raise ValueError("Dense parameter shapes do not match")
        self.weights = np.array(w, dtype=np.float64)
        self.bias = np.array(b, dtype=np.float64)

    def init_params(self, rng):
        self.weights = _glorot_uniform(rng, (self.d_in, self.d_out), self.d_in, self.d_out)
        self.bias = np.full(self.d_out, BIAS_INIT)

    def descriptor(self):
        return {"type": "Dense", "d_in": self.d_in, "d_out": self.d_out}


def _conv_patches(xp, kh, kw, stride):
    """Extract (N, Ho, Wo, kh, kw, C) sliding patches from padded input."""
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(1, 2))
    win = win[:, ::stride, ::stride]
    # sliding_window_view yields (N, Ho, Wo, C, kh, kw); put C last
    return np.ascontiguousarray(win.transpose(0, 1, 2, 4, 5, 3))


def _conv_scatter(dpatches, n, hp, wp, c, stride):
    """Accumulate patch-space values back onto the padded input grid."""
    _, ho, wo, kh, kw, _ = dpatches.shape
    dxp = np.zeros((n, hp, wp, c))
    for i in range(kh):
        for j in range(kw):
            dxp[:, i : i + ho * stride : stride, j : j + wo * stride : stride, :] += dpatches[:, :, :, i, j, :]
    return dxp


class Conv2D(Layer):
    """2-D convolution (cross-correlation) with zero padding.

    Kernels are (kh, kw, c_in, c_out); stride and padding are scalar ints.
    """

    def __init__(self, kh, kw, c_in, c_out, stride=1, padding=0):
        super().__init__()
        self.kh, self.kw = int(kh), int(kw)
        self.c_in, self.c_out = int(c_in), int(c_out)
        self.stride = int(stride)
        self.padding = int(padding)
        self.kernels = np.zeros((self.kh, self.kw, self.c_in, self.c_out))
        self.bias = np.zeros(self.c_out)

    @property
    def has_params(self):
        return True

    def out_shape(self, in_shape):
        if len(in_shape) != 3 or in_shape[2] != self.c_in:
            raise ValueError(f"Conv2D expects (H, W, {self.c_in}), got {in_shape}")
        h, w, _ = in_shape
        ho = (h + 2 * self.padding - self.kh) // self.stride + 1
        wo = (w + 2 * self.padding - self.kw) // self.stride + 1
        if ho <= 0 or wo <= 0:
            raise ValueError(f"Conv2D output collapses for input {in_shape}")
        return (ho, wo, self.c_out)

    def _pad(self, x):
        p = self.padding
        if p == 0:
            return x
        return np.pad(x, ((0, 0), (p, p), (p, p), (0, 0)))

    def _kernel_matrix(self):
        return self.kernels.reshape(self.kh * self.kw * self.c_in, self.c_out)

    def forward(self, x):
        patches = _conv_patches(self._pad(x), self.kh, self.kw, self.stride)
        n, ho, wo = patches.shape[:3]
        flat = patches.reshape(n, ho, wo, -1)
        y = flat @ self._kernel_matrix() + self.bias
        self.last_input = x
        self.last_preact = y
        return y

    def input_grad(self, x, dy, relu_rule=None):
        n, h, w, c = x.shape
        p = self.padding
        dflat = dy @ self._kernel_matrix().T
        dpatches = dflat.reshape(dy.shape[0], dy.shape[1], dy.shape[2], self.kh, self.kw, self.c_in)
        dxp = _conv_scatter(dpatches, n, h + 2 * p, w + 2 * p, c, self.stride)
        return dxp[:, p : p + h, p : p + w, :] if p else dxp

    def param_grads(self, x, dy):
        patches = _conv_patches(self._pad(x), self.kh, self.kw, self.stride)
        n, ho, wo = patches.shape[:3]
        flat = patches.reshape(n * ho * wo, -1)
        dk = flat.T @ dy.reshape(n * ho * wo, self.c_out)
        return {
            "kernels": dk.reshape(self.kernels.shape),
            "bias": dy.sum(axis=(0, 1, 2)),
        }

    def param_arrays(self):
        return {"kernels": self.kernels, "bias": self.bias}

    def set_param_arrays(self, params):
        k, b = params["kernels"], params["bias"]
        if k.shape != self.kernels.shape or b.shape != self.bias.shape:
            raise ValueError("Conv2D parameter shapes do not match")
        self.kernels = np.array(k, dtype=np.float64)
        self.bias = np.array(b, dtype=np.float64)

    def init_params(self, rng):
        fan_in = self.kh * self.kw * self.c_in
        fan_out = self.kh * self.kw * self.c_out
        self.kernels = _glorot_uniform(rng, self.kernels.shape, fan_in, fan_out)
        self.bias = np.full(self.c_out, BIAS_INIT)

    def descriptor(self):
        return {
            "type": "Conv2D",
            "kh": self.kh,
            "kw": self.kw,
            "c_in": self.c_in,
            "c_out": self.c_out,
            "stride": self.stride,
            "padding": self.padding,
        }


class ReLU(Layer):
    """Elementwise max(x, 0); backward honors modified-backprop rules.

    relu_rule None is the plain gradient gate 1[x > 0]. Rule "deconvnet"
    gates on the upstream signal sign only, 1[dy > 0]; rule "gbp" applies
    both gates, 1[x > 0] * 1[dy > 0].
    """

    def forward(self, x):
        self.last_input = x
        y = np.maximum(x, 0.0)
        self.last_preact = y
        return y

    def input_grad(self, x, dy, relu_rule=None):
        if relu_rule is None:
            return dy * (x > 0.0)
        if relu_rule == "deconvnet":
            return dy * (dy > 0.0)
        if relu_rule == "gbp":
            return dy * ((dy > 0.0) & (x > 0.0))
        raise ValueError(f"unknown relu rule {relu_rule!r}")


class MaxPool2D(Layer):
    """Max pooling; backward routes to the argmax, first index on ties."""

    def __init__(self, window, stride=None):
        super().__init__()
        self.window = int(window)
        self.stride = int(stride) if stride is not None else int(window)

    def out_shape(self, in_shape):
        if len(in_shape) != 3:
            raise ValueError(f"MaxPool2D expects (H, W, C), got {in_shape}")
        h, w, c = in_shape
        ho = (h - self.window) // self.stride + 1
        wo = (w - self.window) // self.stride + 1
        if ho <= 0 or wo <= 0:
            raise ValueError(f"MaxPool2D output collapses for input {in_shape}")
        return (ho, wo, c)

    def _windows(self, x):
        win = np.lib.stride_tricks.sliding_window_view(x, (self.window, self.window), axis=(1, 2))
        win = win[:, :: self.stride, :: self.stride]
        n, ho, wo, c = win.shape[:4]
        return win.reshape(n, ho, wo, c, self.window * self.window)

    def forward(self, x):
        flat = self._windows(x)
        y = flat.max(axis=-1)
        self.last_input = x
        self.last_preact = y
        return y

    def route_upstream(self, x, dy):
        """Scatter dy onto each window's argmax position in x's grid."""
        flat = self._windows(x)
        n, ho, wo, c = flat.shape[:4]
        # argmax over row-major (wh, ww) picks the first maximum in scan order
        idx = flat.argmax(axis=-1)
        rows = idx // self.window
        cols = idx % self.window
        ni, hi, wi, ci = np.indices((n, ho, wo, c))
        dx = np.zeros_like(x)
        np.add.at(dx, (ni, hi * self.stride + rows, wi * self.stride + cols, ci), dy)
        return dx

    def input_grad(self, x, dy, relu_rule=None):
        return self.route_upstream(x, dy)

    def descriptor(self):
        return {"type": "MaxPool2D", "window": self.window, "stride": self.stride}


class Flatten(Layer):
    """Row-major reshape (N, H, W, C) -> (N, H*W*C)."""

    def out_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def forward(self, x):
        self.last_input = x
        y = x.reshape(x.shape[0], -1)
        self.last_preact = y
        return y

    def input_grad(self, x, dy, relu_rule=None):
        return dy.reshape(x.shape)


class SigmoidOutput(Layer):
    """Binary output head over a single pre-activation z.

    Class scores are [1 - sigmoid(z), sigmoid(z)]. The equivalent logit
    vector is [-z/2, +z/2], which reproduces the same scores under
    softmax and gives both classes a usable, nonzero attribution target.
    """

    classes = 2

    def out_shape(self, in_shape):
        if in_shape != (1,):
            raise ValueError(f"SigmoidOutput expects (1,), got {in_shape}")
        return (2,)

    def forward(self, x):
        self.last_input = x
        p = 1.0 / (1.0 + np.exp(-x[:, 0]))
        y = np.stack([1.0 - p, p], axis=1)
        self.last_preact = y
        return y

    def logits(self, z):
        return np.concatenate([-z / 2.0, z / 2.0], axis=1)

    def seed_grad(self, z, class_index, target):
        """Gradient of the chosen score wrt the pre-activation z (N, 1)."""
        n = z.shape[0]
        sign = 1.0 if class_index == 1 else -1.0
        if target == "logit":
            return np.full((n, 1), 0.5 * sign)
        p = 1.0 / (1.0 + np.exp(-z))
        return sign * p * (1.0 - p)


class SoftmaxOutput(Layer):
    """Softmax head; keeps pre-softmax logits available as targets."""

    def __init__(self, classes):
        super().__init__()
        self.classes = int(classes)

    def out_shape(self, in_shape):
        if in_shape != (self.classes,):
            raise ValueError(f"SoftmaxOutput expects ({self.classes},), got {in_shape}")
        return (self.classes,)

    def forward(self, x):
        self.last_input = x
        shifted = x - x.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        y = e / e.sum(axis=1, keepdims=True)
        self.last_preact = y
        return y

    def logits(self, z):
        return z

    def seed_grad(self, z, class_index, target):
        n, k = z.shape
        if target == "logit":
            seed = np.zeros((n, k))
            seed[:, class_index] = 1.0
            return seed
        shifted = z - z.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        p = e / e.sum(axis=1, keepdims=True)
        # row of the softmax Jacobian: dp_k/dz_j = p_k (delta_kj - p_j)
        seed = -p[:, class_index : class_index + 1] * p
        seed[:, class_index] += p[:, class_index]
        return seed

    def descriptor(self):
        return {"type": "SoftmaxOutput", "classes": self.classes}


OUTPUT_LAYER_TYPES = (SigmoidOutput, SoftmaxOutput)

_LAYER_BUILDERS = {
    "Dense": lambda d: Dense(d["d_in"], d["d_out"]),
    "Conv2D": lambda d: Conv2D(d["kh"], d["kw"], d["c_in"], d["c_out"], d["stride"], d["padding"]),
    "ReLU": lambda d: ReLU(),
    "MaxPool2D": lambda d: MaxPool2D(d["window"], d["stride"]),
    "Flatten": lambda d: Flatten(),
    "SigmoidOutput": lambda d: SigmoidOutput(),
    "SoftmaxOutput": lambda d: SoftmaxOutput(d["classes"]),
}


def layer_from_descriptor(desc: dict) -> Layer:
    try:
        builder = _LAYER_BUILDERS[desc["type"]]
    except KeyError:
        raise ValueError(f"unknown layer type {desc.get('type')!r}") from None
    return builder(desc)
