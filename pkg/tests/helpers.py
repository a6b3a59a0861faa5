"""Shared test utilities: finite-difference oracles and random nets."""

import numpy as np

from attrdebug.nn import Conv2D, Dense, Flatten, MaxPool2D, Network, ReLU, SigmoidOutput, SoftmaxOutput


def rel_err(a, b):
    """Normwise relative error between an estimate and a reference."""
    scale = max(np.abs(b).max(), 1e-12)
    return np.abs(a - b).max() / scale


def finite_diff_gradient(net, x, class_index, target="logit", h=1e-5):
    """Central-difference gradient of the class target wrt the input."""
    fd = np.zeros(x.size)
    flat = x.ravel()
    for i in range(flat.size):
        xp = flat.copy()
        xm = flat.copy()
        xp[i] += h
        xm[i] -= h
        vp = _target_value(net, xp.reshape(x.shape), class_index, target)
        vm = _target_value(net, xm.reshape(x.shape), class_index, target)
        fd[i] = (vp - vm) / (2 * h)
    return fd.reshape(x.shape)


def _target_value(net, x, class_index, target):
    trace = net.forward(x)
    vec = trace.logit_vector if target == "logit" else trace.score_vector
    return float(vec[class_index])


def random_mlp(rng, in_dim=None, classes=None):
    in_dim = in_dim or int(rng.integers(4, 12))
    classes = classes or int(rng.integers(2, 5))
    h1 = int(rng.integers(5, 14))
    h2 = int(rng.integers(4, 10))
    layers = [
        Dense(in_dim, h1),
        ReLU(),
        Dense(h1, h2),
        ReLU(),
        Dense(h2, classes),
        SoftmaxOutput(classes),
    ]
    net = Network(layers, (in_dim,), classes, seed=int(rng.integers(1 << 30))).initialize()
    return net


def random_conv_net(rng, size=8, channels=2, classes=2, sigmoid=False):
    layers = [
        Conv2D(3, 3, channels, 4, stride=1, padding=1),
        ReLU(),
        MaxPool2D(2),
        Conv2D(3, 3, 4, 4, stride=1, padding=0),
        ReLU(),
        Flatten(),
    ]
    flat = (size // 2 - 2) ** 2 * 4
    if sigmoid:
        layers += [Dense(flat, 1), SigmoidOutput()]
        classes = 2
    else:
        layers += [Dense(flat, classes), SoftmaxOutput(classes)]
    net = Network(layers, (size, size, channels), classes, seed=int(rng.integers(1 << 30))).initialize()
    return net


def safe_input(net, rng, margin=1e-4, tries=50):
    """Input whose trace stays clear of ReLU kinks and pool ties.

    Keeps central differences trustworthy: no pre-activation sits within
    `margin` of a ReLU kink and no pooling window has a near-tie.
    """
    for _ in range(tries):
        x = rng.uniform(-1.0, 1.0, size=net.input_shape)
        trace = net.forward_batch(x[None])
        ok = True
        for layer, xin in zip(net.layers, trace.layer_inputs):
            if isinstance(layer, ReLU) and np.abs(xin).min() < margin:
                ok = False
                break
            if isinstance(layer, MaxPool2D) and layer.window > 1:
                flat = layer._windows(xin)
                top2 = np.sort(flat, axis=-1)[..., -2:]
                gap = top2[..., 1] - top2[..., 0]
                # ties between exact ReLU zeros are inert: both routes carry
                # zero gradient; only near-ties at active windows matter
                active = top2[..., 1] > margin
                if np.any(active & (gap < margin)):
                    ok = False
                    break
        if ok:
            return x
    raise RuntimeError("could not find a kink-free input")
