"""Mini-batch training with SGD/Adam, frozen layers, seeded shuffling.

Batch order is drawn from a counter-based Philox stream keyed on
(config seed, epoch), so runs reproduce bit-for-bit regardless of how
many epochs ran before.
"""

from dataclasses import dataclass, field

import numpy as np

from ..tensor import as_tensor
from .network import Network


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    epochs: int = 10
    batch_size: int = 32
    optimizer: str = "adam"  # "sgd" or "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    frozen_layers: frozenset = field(default_factory=frozenset)
    loss: str = "cross_entropy"  # or "binary_cross_entropy"

    def validate(self, net: Network):
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be > 0")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.loss not in ("cross_entropy", "binary_cross_entropy"):
            raise ValueError(f"unknown loss {self.loss!r}")
        for i in self.frozen_layers:
            if not 0 <= i < len(net.layers):
                raise ValueError(f"frozen layer index {i} out of range")
            if not net.layers[i].has_params:
                raise ValueError(f"frozen layer index {i} names a parameter-free layer")


@dataclass
class TrainReport:
    loss_curve: list
    train_accuracy: float
    val_accuracy: float
    test_accuracy: float


class NaNLossError(RuntimeError):
    def __init__(self, epoch):
        super().__init__(f"loss became non-finite at epoch {epoch}")
        self.epoch = epoch


def _epoch_permutation(seed, epoch, n):
    gen = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(epoch)])))
    return gen.permutation(n)


def _loss_and_output_grad(cfg, scores, labels):
    n = scores.shape[0]
    eps = 1e-12
    if cfg.loss == "cross_entropy":
        picked = scores[np.arange(n), labels]
        loss = -np.log(np.clip(picked, eps, None)).mean()
        onehot = np.zeros_like(scores)
        onehot[np.arange(n), labels] = 1.0
        dz = (scores - onehot) / n  # gradient wrt pre-softmax logits
    else:
        p = scores[:, 1]
        y = (labels == 1).astype(np.float64)
        loss = -(y * np.log(np.clip(p, eps, None)) + (1 - y) * np.log(np.clip(1 - p, eps, None))).mean()
        dz = ((p - y) / n)[:, None]  # gradient wrt the sigmoid pre-activation
    return loss, dz


def accuracy(net: Network, images, labels, batch_size=256) -> float:
    images = as_tensor(images, "images")
    hits = 0
    for start in range(0, len(images), batch_size):
        scores = net.forward_batch(images[start : start + batch_size]).scores
        hits += int((scores.argmax(axis=1) == labels[start : start + batch_size]).sum())
    return hits / len(images)


class _Optimizer:
    def __init__(self, cfg, net):
        self.cfg = cfg
        self.t = 0
        self.m = {}
        self.v = {}
        if cfg.optimizer == "adam":
            for i in net.parameterized_indices:
                for name, arr in net.layers[i].param_arrays().items():
                    self.m[(i, name)] = np.zeros_like(arr)
                    self.v[(i, name)] = np.zeros_like(arr)

    def step(self, net, grads):
        cfg = self.cfg
        self.t += 1
        for (i, name), g in grads.items():
            params = net.layers[i].param_arrays()
            if cfg.optimizer == "sgd":
                params[name] -= cfg.learning_rate * g
                continue
            m = self.m[(i, name)]
            v = self.v[(i, name)]
            m *= cfg.beta1
            m += (1 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1 - cfg.beta2) * g * g
            mhat = m / (1 - cfg.beta1**self.t)
            vhat = v / (1 - cfg.beta2**self.t)
            params[name] -= cfg.learning_rate * mhat / (np.sqrt(vhat) + cfg.adam_eps)


def train(net: Network, data, cfg: TrainConfig, val_data=None, test_data=None) -> TrainReport:
    """Train in place; returns the loss curve and split accuracies.

    `data` is a LabeledDataset (train split); val/test accuracies are
    filled when those splits are passed. Frozen layers are never stepped.
    """
    cfg.validate(net)
    if len(data.examples) == 0:
        raise ValueError("training dataset is empty")
    images = data.images_array()
    labels = data.labels_array()
    if labels.min() < 0 or labels.max() >= net.class_count:
        raise ValueError("labels out of range for this network")
    if cfg.loss == "binary_cross_entropy" and net.class_count != 2:
        raise ValueError("binary cross-entropy needs a 2-class network")

    frozen = set(cfg.frozen_layers)
    trainable = [i for i in net.parameterized_indices if i not in frozen]
    opt = _Optimizer(cfg, net)
    n = len(images)
    loss_curve = []
    for epoch in range(cfg.epochs):
        order = _epoch_permutation(cfg.seed, epoch, n)
        epoch_loss = 0.0
        batches = 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            try:
                trace = net.forward_batch(images[idx])
            except FloatingPointError:
                raise NaNLossError(epoch) from None
            loss, dz = _loss_and_output_grad(cfg, trace.scores, labels[idx])
            if not np.isfinite(loss):
                raise NaNLossError(epoch)
            epoch_loss += loss
            batches += 1
            grads = {}
            dy = dz
            for i in range(len(net.layers) - 2, -1, -1):
                layer = net.layers[i]
                x = trace.layer_inputs[i]
                if i in trainable:
                    for name, g in layer.param_grads(x, dy).items():
                        grads[(i, name)] = g
                if i == 0:
                    break
                dy = layer.input_grad(x, dy)
            opt.step(net, grads)
        loss_curve.append(epoch_loss / batches)

    net.trained_on = list(data.provenance)
    return TrainReport(
        loss_curve=loss_curve,
        train_accuracy=accuracy(net, images, labels),
        val_accuracy=accuracy(net, val_data.images_array(), val_data.labels_array()) if val_data else float("nan"),
        test_accuracy=accuracy(net, test_data.images_array(), test_data.labels_array()) if test_data else float("nan"),
    )
