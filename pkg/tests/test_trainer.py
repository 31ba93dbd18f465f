from dataclasses import replace

import numpy as np
import pytest

from radix_xbar.analog import decode_output, simulate_mvm
from radix_xbar.config import CircuitParams, RadixConfig
from radix_xbar.crossbar import program_crossbar
from radix_xbar.datasets import downsample_8x8, load_mnist_subset
from radix_xbar.errors import EmptyDataset, FormatError, InvalidSetting, ShapeMismatch, StaleCache
from radix_xbar.models import QuantizedTensor
from radix_xbar.trainer import (
    QatState,
    TinyNet,
    accuracy,
    adam_step,
    backward_ste,
    compare_modes,
    effective_weights,
    forward,
    init_state,
    loss_on,
    numerical_gradient,
    snap_to_levels,
    softmax_cross_entropy,
    train,
)

from conftest import make_glyph_dataset, mnist_file


def _state(weights):
    weights = [np.asarray(w, dtype=np.float64) for w in weights]
    return QatState(weights, [np.zeros_like(w) for w in weights], [np.zeros_like(w) for w in weights])


def _linear_net(**kwargs):
    return TinyNet.for_mode("radix", conv_filters=0, input_shape=(1, 3), n_classes=1, weight_clip=1.0, **kwargs)


def test_layer_shapes():
    assert TinyNet().layer_shapes() == [(8, 9), (6 * 6 * 8, 10)]
    assert TinyNet(conv_filters=0, input_shape=(2, 3), n_classes=4).layer_shapes() == [(6, 4)]


def test_mode_presets():
    assert TinyNet.for_mode("bnn").activation == "bnn-sign"
    assert TinyNet.for_mode("radix", quantize_activations=False).activation == "real-relu"
    assert TinyNet.for_mode("real").quantize_inputs is False
    with pytest.raises(ValueError):
        TinyNet.for_mode("ternary")


def test_linear_layer_matches_analog_decode():
    net = _linear_net()
    state = _state([[[0.3], [0.0], [1.0]]])
    w_eff, _, scale = effective_weights(net, state.w_real[0])
    q = np.rint(w_eff / scale).astype(np.int64)
    assert q[:, 0].tolist() == [1, 0, 2]

    logits, _ = forward(net, state, np.array([[[0.5, 0.75, 0.25]]]))

    cfg = net.cfg
    params = CircuitParams()
    program = program_crossbar(QuantizedTensor(q, cfg.w_min_q, cfg.w_max_q), cfg)
    y = decode_output(simulate_mvm(program, QuantizedTensor(np.array([2, 3, 1]), 0, cfg.a_max), params), params)
    assert y.tolist() == [4]
    assert logits[0, 0] == pytest.approx(y[0] * scale / cfg.a_max)


def test_zero_weights_give_zero_logits():
    for net in (_linear_net(), TinyNet.for_mode("radix", input_shape=(5, 5), n_classes=3)):
        state = _state([np.zeros(s) for s in net.layer_shapes()])
        logits, _ = forward(net, state, np.random.default_rng(0).random((4,) + net.input_shape))
        assert not logits.any()


def test_forward_shape_mismatch():
    net = TinyNet()
    state = init_state(net, np.random.default_rng(0))
    with pytest.raises(ShapeMismatch):
        forward(net, state, np.zeros((2, 7, 7)))


@pytest.mark.parametrize("seed", range(20))
def test_real_mode_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    h, w = rng.integers(3, 6, 2)
    net = TinyNet.for_mode(
        "real",
        input_shape=(int(h), int(w)),
        n_classes=int(rng.integers(2, 4)),
        conv_filters=int(rng.integers(1, 3)),
        kernel_size=int(rng.integers(1, 4)),
    )
    state = init_state(net, rng)
    images = rng.random((5, int(h), int(w)))
    labels = rng.integers(0, net.n_classes, 5)

    logits, cache = forward(net, state, images)
    _, loss_grad = softmax_cross_entropy(logits, labels)
    analytic = backward_ste(net, state, cache, loss_grad)
    numeric = numerical_gradient(net, state, images, labels)
    for a, n in zip(analytic, numeric):
        np.testing.assert_allclose(a, n, rtol=1e-5, atol=1e-7)


def test_linear_square_loss_gradient():
    net = TinyNet.for_mode("real", conv_filters=0, input_shape=(1, 3), n_classes=1)
    state = _state([[[0.4], [-0.2], [0.7]]])
    x = np.array([[[0.5, 0.25, 1.0]]])
    logits, cache = forward(net, state, x)
    target = 1.0
    grads = backward_ste(net, state, cache, logits - target)
    np.testing.assert_allclose(grads[0][:, 0], x.ravel() * (logits[0, 0] - target))


def test_zero_loss_gradient_gives_zero_weight_gradient():
    net = TinyNet.for_mode("radix", input_shape=(6, 6), n_classes=3)
    state = init_state(net, np.random.default_rng(1))
    _, cache = forward(net, state, np.random.default_rng(2).random((4, 6, 6)))
    for g in backward_ste(net, state, cache, np.zeros((4, 3))):
        assert not g.any()


def test_clipped_ste_blocks_out_of_range_weights():
    net = TinyNet.for_mode("radix", conv_filters=0, input_shape=(1, 3), n_classes=1, weight_clip=0.5)
    state = _state([[[0.2], [0.8], [-0.9]]])
    _, cache = forward(net, state, np.array([[[0.5, 0.5, 0.5]]]))
    grads = backward_ste(net, state, cache, np.ones((1, 1)))
    assert grads[0][0, 0] != 0
    assert grads[0][1, 0] == 0 and grads[0][2, 0] == 0


def test_stale_cache():
    net = TinyNet.for_mode("real", input_shape=(5, 5), n_classes=2)
    state = init_state(net, np.random.default_rng(0))
    images = np.random.default_rng(1).random((3, 5, 5))
    logits, cache = forward(net, state, images)
    _, loss_grad = softmax_cross_entropy(logits, np.array([0, 1, 0]))
    state = adam_step(state, backward_ste(net, state, cache, loss_grad))
    with pytest.raises(StaleCache):
        backward_ste(net, state, cache, loss_grad)


def test_adam_zero_gradient_keeps_weights():
    state = _state([np.ones((2, 3))])
    updated = adam_step(state, [np.zeros((2, 3))])
    np.testing.assert_array_equal(updated.w_real[0], state.w_real[0])
    assert updated.step == 1


def test_adam_first_step_is_lr_times_sign():
    state = _state([np.zeros((2, 2))])
    g = np.array([[0.3, -2.0], [5.0, -0.01]])
    updated = adam_step(state, [g])
    np.testing.assert_allclose(updated.w_real[0], -1e-3 * np.sign(g), rtol=1e-5)


def test_adam_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        adam_step(_state([np.zeros(3)]), [np.zeros(4)])


def test_checkpoint_round_trip(tmp_path):
    net = TinyNet(input_shape=(5, 5), n_classes=3)
    state = replace(init_state(net, np.random.default_rng(0), lr=0.01), step=7)
    path = tmp_path / "model.qat"
    state.save(path)
    loaded = QatState.load(path)
    assert path.read_bytes()[:4] == b"QAT1"
    assert loaded.step == 7 and loaded.hyper == state.hyper
    for a, b in zip(loaded.w_real, state.w_real):
        np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("data", [b"NOPE", b"QAT1\x01\x00\x00\x00RXT1"])
def test_corrupt_checkpoint(data):
    with pytest.raises(FormatError):
        QatState.from_bytes(data)


def test_snap_to_levels_is_idempotent():
    net = TinyNet.for_mode("radix")
    w = np.random.default_rng(0).normal(size=(8, 9))
    snapped = snap_to_levels(net, w)
    assert len(np.unique(snapped)) <= 5
    np.testing.assert_allclose(snap_to_levels(net, snapped), snapped)


@pytest.mark.parametrize("mode", ["real", "bnn", "radix"])
def test_loss_decreases_on_toy_task(quadrant_dataset, mode):
    images, labels = quadrant_dataset
    net = TinyNet.for_mode(mode, n_classes=4)
    state = replace(init_state(net, np.random.default_rng(0)), lr=0.01)
    before = loss_on(net, state, images, labels)
    rng = np.random.default_rng(1)
    for _ in range(60):
        idx = rng.choice(len(images), 32, replace=False)
        logits, cache = forward(net, state, images[idx])
        _, loss_grad = softmax_cross_entropy(logits, labels[idx])
        state = adam_step(state, backward_ste(net, state, cache, loss_grad))
    assert loss_on(net, state, images, labels) < before


def test_training_is_deterministic(quadrant_dataset):
    net = TinyNet.for_mode("radix", n_classes=4)
    state_a, trace_a = train(net, quadrant_dataset, epochs=2, seed=5)
    state_b, trace_b = train(net, quadrant_dataset, epochs=2, seed=5)
    assert trace_a == trace_b
    for a, b in zip(state_a.w_real, state_b.w_real):
        np.testing.assert_array_equal(a, b)


def test_zero_epochs_gives_initial_trace(quadrant_dataset):
    _, trace = train(TinyNet.for_mode("radix", n_classes=4), quadrant_dataset, epochs=0)
    assert len(trace) == 1
    assert trace[0].epoch == 0 and trace[0].mode == "radix"


def test_untrained_network_is_near_chance():
    dataset = make_glyph_dataset(n=500, seed=1)
    accs = [train(TinyNet.for_mode("radix"), dataset, epochs=0, seed=s)[1][0].val_acc for s in range(5)]
    assert np.mean(accs) < 0.3


@pytest.mark.parametrize("kwargs", [{"epochs": -1}, {"epochs": 1, "batch_size": 0}])
def test_bad_training_settings(quadrant_dataset, kwargs):
    with pytest.raises(InvalidSetting):
        train(TinyNet.for_mode("radix", n_classes=4), quadrant_dataset, **kwargs)


def test_empty_dataset():
    with pytest.raises(EmptyDataset):
        train(TinyNet(), (np.zeros((0, 8, 8)), np.zeros(0)), epochs=1)


def test_shadow_weights_are_needed(quadrant_dataset):
    net = TinyNet.for_mode("radix", n_classes=4)
    _, kept = train(net, quadrant_dataset, epochs=20, seed=0, lr=0.01)
    _, snapped = train(net, quadrant_dataset, epochs=20, seed=0, lr=0.01, keep_shadow=False)
    assert kept[-1].val_acc >= 0.7
    assert kept[-1].val_acc > snapped[-1].val_acc


def test_all_modes_beat_chance(quadrant_dataset):
    results = compare_modes(quadrant_dataset, epochs=15, seed=0, net_kwargs={"n_classes": 4}, lr=0.01)
    for mode, (state, trace) in results.items():
        assert trace[-1].mode == mode
        assert trace[-1].val_acc > 0.4


def test_mode_ordering_on_glyph_digits():
    dataset = make_glyph_dataset(n=1000, seed=0)
    final = {"real": [], "bnn": [], "radix": []}
    for seed in range(3):
        for mode, (_, trace) in compare_modes(dataset, epochs=15, seed=seed, lr=0.01).items():
            final[mode].append(trace[-1].val_acc)
    mean = {mode: float(np.mean(accs)) for mode, accs in final.items()}
    # four validation samples of slack per step
    assert mean["real"] >= mean["radix"] - 0.02
    assert mean["radix"] >= mean["bnn"] - 0.02
    assert mean["bnn"] > 0.5


def test_mnist_mode_ordering(mnist_dir):
    images, labels = load_mnist_subset(
        mnist_file(mnist_dir, "train-images-idx3-ubyte"),
        mnist_file(mnist_dir, "train-labels-idx1-ubyte"),
        count=1000,
    )
    results = compare_modes((downsample_8x8(images), labels), epochs=20, seed=0)
    final = {mode: trace[-1].val_acc for mode, (_, trace) in results.items()}
    assert final["real"] >= final["radix"] >= final["bnn"]
    assert min(final.values()) > 0.3


def test_accuracy_of_empty_split_is_nan():
    net = TinyNet()
    state = init_state(net, np.random.default_rng(0))
    assert np.isnan(accuracy(net, state, np.zeros((0, 8, 8)), np.zeros(0)))


def test_radix_config_is_carried():
    net = TinyNet.for_mode("radix", cfg=RadixConfig(x=7))
    assert net.cfg.a_max == 6
