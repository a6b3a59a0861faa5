"""Network-level contracts: traces, gradients, reinit, serialization."""

import numpy as np
import pytest

from attrdebug.nn import (
    Dense,
    ModelFormatError,
    Network,
    ReLU,
    ShapeMismatch,
    SoftmaxOutput,
    backward_gradient,
    forward,
    load,
    reinit_layers,
    save,
    serialize,
)
from helpers import finite_diff_gradient, random_conv_net, random_mlp, rel_err, safe_input

RNG = np.random.default_rng(99)


def _linear_net(weights):
    w = np.asarray(weights, dtype=np.float64)
    layer = Dense(w.size, 1)
    layer.set_param_arrays({"weights": w.reshape(-1, 1), "bias": np.array([0.0])})
    head = Dense(1, 2)
    head.set_param_arrays({"weights": np.array([[0.0, 1.0]]), "bias": np.zeros(2)})
    return Network([layer, ReLU(), head, SoftmaxOutput(2)], (w.size,), 2, seed=0)


def test_trace_has_one_entry_per_layer():
    net = random_mlp(RNG)
    x = RNG.normal(size=net.input_shape)
    trace = forward(net, x)
    assert len(trace.layer_inputs) == len(net.layers)
    assert trace.score_vector.shape == (net.class_count,)
    assert np.isclose(trace.score_vector.sum(), 1.0)
    for layer in net.layers:
        assert layer.last_input is not None  # caches populated


def test_forward_shape_mismatch_names_layer():
    net = random_mlp(RNG, in_dim=6)
    with pytest.raises(ShapeMismatch) as err:
        forward(net, np.zeros(7))
    assert err.value.layer_index == 0


def test_single_dense_score_by_hand():
    net = _linear_net([1.0, 2.0])
    trace = forward(net, np.array([3.0, 4.0]))
    assert trace.logit_vector[1] == pytest.approx(11.0)


def test_linear_model_gradient_is_weights():
    net = _linear_net([1.0, 2.0])
    trace = forward(net, np.array([3.0, 4.0]))
    g = backward_gradient(net, trace, 1)
    assert np.allclose(g, [1.0, 2.0])


def test_gradient_matches_finite_differences_random_nets():
    for trial in range(6):
        rng = np.random.default_rng(500 + trial)
        net = random_mlp(rng) if trial % 2 == 0 else random_conv_net(rng)
        x = safe_input(net, rng)
        cls = int(rng.integers(net.class_count))
        g = backward_gradient(net, forward(net, x), cls)
        fd = finite_diff_gradient(net, x, cls)
        assert rel_err(g, fd) < 1e-4


def test_gradient_matches_finite_differences_prob_target():
    rng = np.random.default_rng(41)
    net = random_conv_net(rng, sigmoid=True)
    x = safe_input(net, rng)
    g = backward_gradient(net, forward(net, x), 1, target="prob")
    fd = finite_diff_gradient(net, x, 1, target="prob")
    assert rel_err(g, fd) < 1e-4


def test_class_index_out_of_range():
    net = random_mlp(RNG, classes=3)
    trace = forward(net, np.zeros(net.input_shape))
    with pytest.raises(IndexError):
        backward_gradient(net, trace, 3)


def test_trace_from_other_net_rejected():
    rng = np.random.default_rng(7)
    a = random_mlp(rng, in_dim=5, classes=2)
    b = random_mlp(rng, in_dim=5, classes=2)
    trace = forward(a, np.zeros(5))
    with pytest.raises(ValueError):
        b.backprop_input(trace, np.zeros((1, 2)))


def test_determinism_same_seed_same_weights():
    from attrdebug.nn import build_network

    a = build_network("cnn_tiny", (16, 16, 3), 2, seed=11)
    b = build_network("cnn_tiny", (16, 16, 3), 2, seed=11)
    assert serialize(a) == serialize(b)
    c = build_network("cnn_tiny", (16, 16, 3), 2, seed=12)
    assert serialize(a) != serialize(c)


class TestReinit:
    def test_empty_set_is_identity(self):
        net = random_mlp(RNG)
        assert serialize(reinit_layers(net, [], seed=3)) == serialize(net)

    def test_untouched_layers_bit_identical(self):
        net = random_conv_net(np.random.default_rng(3))
        top = net.parameterized_indices[-1]
        out = reinit_layers(net, [top], seed=5)
        for i in net.parameterized_indices[:-1]:
            for name, arr in net.layers[i].param_arrays().items():
                assert np.array_equal(arr, out.layers[i].param_arrays()[name])
        assert not np.array_equal(
            net.layers[top].param_arrays()["weights"], out.layers[top].param_arrays()["weights"]
        )
        # input net unmodified
        assert net.layers[top].param_arrays()["weights"] is not out.layers[top].param_arrays()["weights"]

    def test_composition_with_index_derived_seeds(self):
        net = random_conv_net(np.random.default_rng(4))
        k, j = net.parameterized_indices[-1], net.parameterized_indices[0]
        once = reinit_layers(net, [k, j], seed=9)
        twice = reinit_layers(reinit_layers(net, [k], seed=9), [j], seed=9)
        assert serialize(once) == serialize(twice)

    def test_parameter_free_layer_rejected(self):
        net = random_mlp(RNG)
        relu_index = next(i for i, l in enumerate(net.layers) if not l.has_params)
        with pytest.raises(ValueError):
            reinit_layers(net, [relu_index], seed=1)


class TestModelIO:
    def test_round_trip_bit_exact(self, tmp_path):
        net = random_conv_net(np.random.default_rng(5))
        path = tmp_path / "model.adnn"
        save(net, path)
        loaded = load(path)
        assert serialize(loaded) == serialize(net)

    def test_truncated_file_names_lengths(self, tmp_path):
        net = random_mlp(RNG)
        path = tmp_path / "model.adnn"
        save(net, path)
        blob = path.read_bytes()
        path.write_bytes(blob[:-16])
        with pytest.raises(ModelFormatError, match="expected .* bytes, got"):
            load(path)

    def test_future_version_rejected(self, tmp_path):
        net = random_mlp(RNG)
        path = tmp_path / "model.adnn"
        save(net, path)
        blob = bytearray(path.read_bytes())
        blob[4] = 2  # bump the version field
        path.write_bytes(bytes(blob))
        with pytest.raises(ModelFormatError, match="version"):
            load(path)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "model.adnn"
        path.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(ModelFormatError, match="magic"):
            load(path)
