"""Named network architectures.

The conv net used throughout the battery ("bvd_small") keeps the
5-conv / 3-dense silhouette of a small image classifier while staying
cheap enough to train on a laptop-scale budget.
"""

import numpy as np

from .layers import Conv2D, Dense, Flatten, MaxPool2D, ReLU, SigmoidOutput, SoftmaxOutput
from .network import Network


def _mlp(input_shape, classes, hidden):
    dims = [int(np.prod(input_shape))] + list(hidden)
    layers = []
    for a, b in zip(dims, dims[1:]):
        layers += [Dense(a, b), ReLU()]
    layers += [Dense(dims[-1], classes), SoftmaxOutput(classes)]
    return layers


def _bvd_small(input_shape, classes):
    h, w, c = input_shape
    layers = [
        Conv2D(3, 3, c, 8, stride=1, padding=1),
        ReLU(),
        Conv2D(3, 3, 8, 8, stride=1, padding=1),
        ReLU(),
        MaxPool2D(2),
        Conv2D(3, 3, 8, 16, stride=1, padding=1),
        ReLU(),
        Conv2D(3, 3, 16, 16, stride=1, padding=1),
        ReLU(),
        MaxPool2D(2),
        Conv2D(3, 3, 16, 16, stride=1, padding=1),
        ReLU(),
        Flatten(),
        Dense((h // 4) * (w // 4) * 16, 64),
        ReLU(),
        Dense(64, 32),
        ReLU(),
        Dense(32, classes),
        SoftmaxOutput(classes),
    ]
    return layers


def _cnn_tiny(input_shape, classes):
    h, w, c = input_shape
    layers = [
        Conv2D(3, 3, c, 8, stride=1, padding=1),
        ReLU(),
        MaxPool2D(2),
        Conv2D(3, 3, 8, 16, stride=1, padding=1),
        ReLU(),
        MaxPool2D(2),
        Flatten(),
        Dense((h // 4) * (w // 4) * 16, 32),
        ReLU(),
        Dense(32, classes),
        SoftmaxOutput(classes),
    ]
    return layers


def _binary_sigmoid_cnn(input_shape, classes):
    if classes != 2:
        raise ValueError("binary_sigmoid_cnn is a 2-class architecture")
    h, w, c = input_shape
    layers = [
        Conv2D(3, 3, c, 8, stride=1, padding=1),
        ReLU(),
        MaxPool2D(2),
        Conv2D(3, 3, 8, 16, stride=1, padding=1),
        ReLU(),
        MaxPool2D(2),
        Flatten(),
        Dense((h // 4) * (w // 4) * 16, 32),
        ReLU(),
        Dense(32, 1),
        SigmoidOutput(),
    ]
    return layers


ARCHITECTURES = {
    "mlp_small": lambda shape, classes: _mlp(shape, classes, [32, 16]),
    "cnn_tiny": _cnn_tiny,
    "bvd_small": _bvd_small,
    "binary_sigmoid_cnn": _binary_sigmoid_cnn,
}


def build_network(arch_id: str, input_shape, classes: int, seed: int) -> Network:
    """Construct and initialize a named architecture."""
    try:
        factory = ARCHITECTURES[arch_id]
    except KeyError:
        raise ValueError(f"unknown architecture {arch_id!r}; known: {sorted(ARCHITECTURES)}") from None
    net = Network(factory(tuple(input_shape), classes), input_shape, classes, seed, arch_id=arch_id)
    return net.initialize()
