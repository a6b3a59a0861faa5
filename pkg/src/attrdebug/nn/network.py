"""Sequential network container: traced forward, gradient backward, reinit.

A Network owns an ordered layer list ending in an output head
(SigmoidOutput or SoftmaxOutput). Forward passes record an
ActivationTrace holding every layer input, the pre-softmax logits, and
the class scores; backward walks consume the trace, never layer caches,
so traces for different inputs can be processed independently.
"""

import numpy as np

from ..tensor import as_tensor, check_finite
from .layers import (
    OUTPUT_LAYER_TYPES,
    Layer,
    ShapeMismatch,
    layer_from_descriptor,
)


class ActivationTrace:
    """Recorded forward pass: one input entry per layer plus outputs.

    Arrays carry a leading batch axis; `single` marks traces built from
    one unbatched input, in which case gradient results are returned
    without the batch axis.
    """

    def __init__(self, net, layer_inputs, scores, logits, single):
        self.net = net
        self.layer_inputs = layer_inputs
        self.scores = scores
        self.logits = logits
        self.single = single

    @property
    def batch_size(self):
        return self.scores.shape[0]

    @property
    def score_vector(self):
        return self.scores[0] if self.single else self.scores

    @property
    def logit_vector(self):
        return self.logits[0] if self.single else self.logits


class Network:
    """Ordered layers + init bookkeeping; immutable from callers' view
    once trained (training and reinit return or mutate explicitly)."""

    def __init__(self, layers, input_shape, class_count, seed, init_scheme="glorot_uniform", arch_id=None):
        if not layers or not isinstance(layers[-1], OUTPUT_LAYER_TYPES):
            raise ValueError("network must end in SigmoidOutput or SoftmaxOutput")
        self.layers = list(layers)
        self.input_shape = tuple(int(s) for s in input_shape)
        self.class_count = int(class_count)
        self.seed = int(seed)
        self.init_scheme = init_scheme
        self.arch_id = arch_id
        self.trained_on = []  # provenance of the dataset this net was trained on
        self._validate_shapes()
        if self.layers[-1].classes != self.class_count:
            raise ValueError(
                f"output head emits {self.layers[-1].classes} classes, network declares {self.class_count}"
            )

    def _validate_shapes(self):
        shape = self.input_shape
        self._layer_in_shapes = []
        for i, layer in enumerate(self.layers):
            self._layer_in_shapes.append(shape)
            try:
                shape = layer.out_shape(shape)
            except ValueError as exc:
                raise ShapeMismatch(i, str(exc)) from None
        self.output_shape = shape

    def initialize(self):
        """Draw all parameters from the init scheme, one stream per layer."""
        if self.init_scheme != "glorot_uniform":
            raise ValueError(f"unknown init scheme {self.init_scheme!r}")
        for i, layer in enumerate(self.layers):
            if layer.has_params:
                layer.init_params(np.random.default_rng(np.random.SeedSequence([self.seed, i])))
        return self

    @property
    def parameterized_indices(self):
        return [i for i, layer in enumerate(self.layers) if layer.has_params]

    @property
    def output_layer(self):
        return self.layers[-1]

    def clear_caches(self):
        for layer in self.layers:
            layer.clear_cache()

    # -- forward / backward ------------------------------------------------

    def forward_batch(self, xs):
        xs = as_tensor(xs, "input batch")
        if xs.shape[1:] != self.input_shape:
            raise ShapeMismatch(0, f"expected input {self.input_shape}, got {xs.shape[1:]}")
        layer_inputs = []
        h = xs
        for i, layer in enumerate(self.layers):
            layer_inputs.append(h)
            try:
                h = layer.forward(h)
            except ValueError as exc:  # defensive: construction already validated
                raise ShapeMismatch(i, str(exc)) from None
        scores = check_finite(h, "class scores")
        logits = self.output_layer.logits(layer_inputs[-1])
        return ActivationTrace(self, layer_inputs, scores, logits, single=False)

    def forward(self, x):
        x = as_tensor(x, "input")
        if x.shape != self.input_shape:
            raise ShapeMismatch(0, f"expected input {self.input_shape}, got {x.shape}")
        trace = self.forward_batch(x[None])
        trace.single = True
        return trace

    def backprop_input(self, trace, seed_grad, relu_rule=None, stop_at=0):
        """Walk gradients from the output head's input down to layer `stop_at`.

        seed_grad is d(target)/d(output-head input). Returns the gradient
        wrt the input of layer `stop_at` (the network input by default).
        """
        if trace.net is not self:
            raise ValueError("trace was produced by a different network")
        dy = seed_grad
        for i in range(len(self.layers) - 2, stop_at - 1, -1):
            dy = self.layers[i].input_grad(trace.layer_inputs[i], dy, relu_rule=relu_rule)
        return dy

    def class_seed(self, trace, class_index, target="logit"):
        if not 0 <= class_index < self.class_count:
            raise IndexError(f"class index {class_index} out of range [0, {self.class_count})")
        if target not in ("logit", "prob"):
            raise ValueError(f"target must be 'logit' or 'prob', got {target!r}")
        return self.output_layer.seed_grad(trace.layer_inputs[-1], class_index, target)

    # -- parameter surgery --------------------------------------------------

    def snapshot_params(self):
        return [
            {k: v.copy() for k, v in layer.param_arrays().items()} for layer in self.layers
        ]

    def restore_params(self, snapshot):
        for layer, params in zip(self.layers, snapshot):
            if params:
                layer.set_param_arrays(params)

    def clone(self):
        net = Network(
            [layer_from_descriptor(l.descriptor()) for l in self.layers],
            self.input_shape,
            self.class_count,
            self.seed,
            self.init_scheme,
            self.arch_id,
        )
        net.restore_params(self.snapshot_params())
        net.trained_on = list(self.trained_on)
        return net


def forward(net: Network, x) -> ActivationTrace:
    """Traced forward pass for a single input."""
    return net.forward(x)


def backward_gradient(net: Network, trace: ActivationTrace, class_index: int, target="logit", relu_rule=None):
    """Gradient of the selected class target wrt the network input.

    Returns an array with the input shape for single-input traces, or
    with a leading batch axis for batched traces.
    """
    seed = net.class_seed(trace, class_index, target)
    grad = net.backprop_input(trace, seed, relu_rule=relu_rule)
    grad = check_finite(grad, "input gradient")
    return grad[0] if trace.single else grad


def batch_gradients(net: Network, xs, class_index: int, target="logit", relu_rule=None):
    """Forward + backward for a batch sharing one target class."""
    trace = net.forward_batch(xs)
    return backward_gradient(net, trace, class_index, target=target, relu_rule=relu_rule)


def reinit_layers(net: Network, layer_indices, seed: int) -> Network:
    """Copy of `net` with the listed layers re-drawn from the init scheme.

    Each layer's redraw stream depends only on (seed, layer index), so
    re-initializing {k} then {j} equals re-initializing {k, j} in one call.
    """
    indices = sorted(set(int(i) for i in layer_indices))
    for i in indices:
        if not 0 <= i < len(net.layers):
            raise IndexError(f"layer index {i} out of range")
        if not net.layers[i].has_params:
            raise ValueError(f"layer {i} ({type(net.layers[i]).__name__}) has no parameters to re-initialize")
    out = net.clone()
    for i in indices:
        out.layers[i].init_params(np.random.default_rng(np.random.SeedSequence([int(seed), i])))
    return out
