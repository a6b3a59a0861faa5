"""Relevance-rule contracts: equivalences, conservation, gating."""

import numpy as np
import pytest

from attrdebug.attributions import lrp, modified_backprop
from attrdebug.nn import (
    Conv2D,
    Dense,
    Flatten,
    MaxPool2D,
    Network,
    ReLU,
    SoftmaxOutput,
    backward_gradient,
    forward,
)
from helpers import random_conv_net, random_mlp


def _zero_biases(net):
    for i in net.parameterized_indices:
        net.layers[i].param_arrays()["bias"][:] = 0.0
    return net


def _positive_net():
    """All weights positive, so every signal stays positive end to end."""
    rng = np.random.default_rng(60)
    l1 = Dense(4, 5)
    l1.set_param_arrays({"weights": rng.uniform(0.1, 1.0, (4, 5)), "bias": np.zeros(5)})
    l2 = Dense(5, 2)
    l2.set_param_arrays({"weights": rng.uniform(0.1, 1.0, (5, 2)), "bias": np.zeros(2)})
    return Network([l1, ReLU(), l2, SoftmaxOutput(2)], (4,), 2, seed=0)


class TestModifiedBackprop:
    def test_no_relu_equals_plain_gradient(self):
        layer = Dense(5, 2)
        layer.init_params(np.random.default_rng(1))
        net = Network([layer, SoftmaxOutput(2)], (5,), 2, seed=0)
        x = np.random.default_rng(2).normal(size=5)
        g = backward_gradient(net, forward(net, x), 1)
        for rule in ("gbp", "deconvnet"):
            assert np.array_equal(modified_backprop(net, x, 1, rule).values, g)

    def test_all_positive_signals_match_gradient(self):
        net = _positive_net()
        x = np.array([0.5, 1.0, 0.2, 0.8])
        g = backward_gradient(net, forward(net, x), 1)
        assert np.array_equal(modified_backprop(net, x, 1, "gbp").values, g)
        assert np.array_equal(modified_backprop(net, x, 1, "deconvnet").values, g)

    def test_rules_differ_on_mixed_signs(self):
        rng = np.random.default_rng(3)
        net = random_conv_net(rng)
        x = rng.uniform(0, 1, net.input_shape)
        g = backward_gradient(net, forward(net, x), 0)
        gbp = modified_backprop(net, x, 0, "gbp").values
        dcn = modified_backprop(net, x, 0, "deconvnet").values
        assert not np.array_equal(gbp, g)
        assert not np.array_equal(dcn, gbp)

    def test_unknown_rule_rejected(self):
        net = _positive_net()
        with pytest.raises(ValueError, match="rule"):
            modified_backprop(net, np.ones(4), 0, "taylor")


class TestLrpZ:
    def test_equals_input_times_signed_gradient_dense(self):
        net = _zero_biases(random_mlp(np.random.default_rng(4)))
        x = np.random.default_rng(5).normal(size=net.input_shape)
        m = lrp(net, x, 1, rule="z")
        g = backward_gradient(net, forward(net, x), 1)
        assert np.abs(m.values - x * g).max() < 1e-8

    def test_equals_input_times_signed_gradient_conv(self):
        net = _zero_biases(random_conv_net(np.random.default_rng(6)))
        x = np.random.default_rng(7).uniform(0.1, 1.0, net.input_shape)
        m = lrp(net, x, 0, rule="z")
        g = backward_gradient(net, forward(net, x), 0)
        assert np.abs(m.values - x * g).max() < 1e-8

    def test_conservation_bias_free(self):
        net = _zero_biases(random_conv_net(np.random.default_rng(8)))
        x = np.random.default_rng(9).uniform(0.1, 1.0, net.input_shape)
        m = lrp(net, x, 1, rule="z")
        logit = forward(net, x).logit_vector[1]
        assert abs(m.values.sum() - logit) / max(abs(logit), 1e-12) < 1e-6

    def test_vanishing_denominator_raises(self):
        l1 = Dense(2, 1)
        l1.set_param_arrays({"weights": np.array([[1.0], [-1.0]]), "bias": np.zeros(1)})
        l2 = Dense(1, 2)
        l2.set_param_arrays({"weights": np.array([[1.0, -1.0]]), "bias": np.zeros(2)})
        net = Network([l1, ReLU(), l2, SoftmaxOutput(2)], (2,), 2, seed=0)
        with pytest.raises(ZeroDivisionError, match="z rule"):
            lrp(net, np.array([1.0, 1.0]), 0, rule="z")  # 1 - 1 = 0 pre-activation


class TestLrpEps:
    def test_stabilized_where_z_fails(self):
        l1 = Dense(2, 1)
        l1.set_param_arrays({"weights": np.array([[1.0], [-1.0]]), "bias": np.zeros(1)})
        l2 = Dense(1, 2)
        l2.set_param_arrays({"weights": np.array([[1.0, -1.0]]), "bias": np.zeros(2)})
        net = Network([l1, ReLU(), l2, SoftmaxOutput(2)], (2,), 2, seed=0)
        m = lrp(net, np.array([1.0, 1.0]), 0, rule="eps", eps=1e-6)
        assert np.all(np.isfinite(m.values))

    def test_approaches_z_rule_for_tiny_eps(self):
        net = _zero_biases(random_mlp(np.random.default_rng(10)))
        x = np.random.default_rng(11).normal(size=net.input_shape)
        z = lrp(net, x, 0, rule="z").values
        e = lrp(net, x, 0, rule="eps", eps=1e-12).values
        assert np.abs(z - e).max() < 1e-6


class TestLrpAlphaBeta:
    def test_alpha_minus_beta_must_be_one(self):
        net = random_mlp(np.random.default_rng(12))
        with pytest.raises(ValueError, match="alpha"):
            lrp(net, np.zeros(net.input_shape), 0, rule="alphabeta", alpha=2.0, beta=0.5)

    def test_positive_relevance_for_positive_logit(self):
        for seed in range(5):
            rng = np.random.default_rng(100 + seed)
            net = _zero_biases(random_conv_net(rng))
            x = rng.uniform(0.1, 1.0, net.input_shape)
            trace = forward(net, x)
            cls = int(trace.logit_vector.argmax())
            if trace.logit_vector[cls] <= 0:
                continue
            m = lrp(net, x, cls, rule="alphabeta", alpha=1.0, beta=0.0)
            assert m.values.min() >= -1e-12

    def test_alpha1_beta0_ignores_negative_contributions(self):
        # one positive and one negative path into a positive logit; only the
        # positive path receives relevance
        l1 = Dense(2, 2)
        l1.set_param_arrays({"weights": np.array([[2.0, 0.0], [0.0, -1.0]]), "bias": np.zeros(2)})
        l2 = Dense(2, 2)
        l2.set_param_arrays({"weights": np.array([[1.0, 0.0], [1.0, 0.0]]), "bias": np.zeros(2)})
        net = Network([l1, l2, SoftmaxOutput(2)], (2,), 2, seed=0)
        m = lrp(net, np.array([1.0, 1.0]), 0, rule="alphabeta", alpha=1.0, beta=0.0)
        assert np.allclose(m.values, [1.0, 0.0])


class TestCompositeFlat:
    def test_produces_finite_full_shape_map(self):
        rng = np.random.default_rng(13)
        net = random_conv_net(rng)
        x = rng.uniform(0, 1, net.input_shape)
        m = lrp(net, x, 1, rule="composite_flat")
        assert m.values.shape == net.input_shape
        assert np.all(np.isfinite(m.values))

    def test_first_layer_flat_smooths_relevance(self):
        # flat first layer redistributes uniformly over receptive fields, so
        # relevance within any interior patch varies less than under eps
        rng = np.random.default_rng(14)
        net = random_conv_net(rng)
        x = rng.uniform(0, 1, net.input_shape)
        flat_map = np.abs(lrp(net, x, 0, rule="composite_flat").values).sum(axis=2)
        eps_map = np.abs(lrp(net, x, 0, rule="eps").values).sum(axis=2)
        assert flat_map.std() / (flat_map.mean() + 1e-12) < eps_map.std() / (eps_map.mean() + 1e-12)


class TestStructuralRules:
    def test_pool_and_flatten_route_relevance_conservatively(self):
        net = _zero_biases(random_conv_net(np.random.default_rng(15)))
        x = np.random.default_rng(16).uniform(0.1, 1.0, net.input_shape)
        m = lrp(net, x, 0, rule="z")
        # conservation through the whole stack covers pool/flatten routing
        logit = forward(net, x).logit_vector[0]
        assert abs(m.values.sum() - logit) / max(abs(logit), 1e-12) < 1e-6

    def test_purity_identical_reruns(self):
        rng = np.random.default_rng(17)
        net = random_conv_net(rng)
        x = rng.uniform(0, 1, net.input_shape)
        a = lrp(net, x, 0, rule="alphabeta")
        b = lrp(net, x, 0, rule="alphabeta")
        assert np.array_equal(a.values, b.values)

    def test_unsupported_layer_rejected(self):
        # a network with a hidden output-head layer is not a valid LRP target
        from attrdebug.nn import SigmoidOutput

        inner = SigmoidOutput()
        net = Network.__new__(Network)
        net.layers = [Dense(2, 1), inner, Dense(1, 2), SoftmaxOutput(2)]
        net.input_shape = (2,)
        net.class_count = 2
        with pytest.raises(ValueError, match="does not support"):
            lrp(net, np.zeros(2), 0, rule="z")
