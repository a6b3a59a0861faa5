from .layers import (
    Conv2D,
    Dense,
    Flatten,
    Layer,
    MaxPool2D,
    ReLU,
    ShapeMismatch,
    SigmoidOutput,
    SoftmaxOutput,
)
from .network import ActivationTrace, Network, backward_gradient, batch_gradients, forward, reinit_layers
from .modelio import ModelFormatError, load, save, serialize
from .train import NaNLossError, TrainConfig, TrainReport, accuracy, train
from .architectures import ARCHITECTURES, build_network

__all__ = [
    "ARCHITECTURES",
    "ActivationTrace",
    "Conv2D",
    "Dense",
    "Flatten",
    "Layer",
    "MaxPool2D",
    "ModelFormatError",
    "NaNLossError",
    "Network",
    "ReLU",
    "ShapeMismatch",
    "SigmoidOutput",
    "SoftmaxOutput",
    "TrainConfig",
    "TrainReport",
    "accuracy",
    "backward_gradient",
    "batch_gradients",
    "build_network",
    "forward",
    "load",
    "reinit_layers",
    "save",
    "serialize",
    "train",
]
