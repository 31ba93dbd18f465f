import numpy as np
import pytest

from radix_xbar.config import SOBEL_KERNEL, RadixConfig
from radix_xbar.errors import BadMax, ConstantTensor, NonFinite
from radix_xbar.quantizer import (
    binarize,
    dequantize_weights,
    level_histogram,
    quantize_weights,
    radix_relu,
)


def test_sobel_kernel_quantizes_to_itself(radix5):
    sobel = np.array(SOBEL_KERNEL, dtype=np.float64)
    q = quantize_weights(sobel, radix5)
    np.testing.assert_array_equal(q.values, np.array(SOBEL_KERNEL))
    assert q.bounds == (-2, 2)


def test_endpoints_map_to_alphabet_extremes(radix5):
    q = quantize_weights([-1.0, 1.0], radix5)
    assert q.values.tolist() == [-2, 2]


def test_uniform_weights_fill_levels_evenly(radix5):
    w = np.random.default_rng(0).uniform(-1, 1, 100_000)
    hist = level_histogram(quantize_weights(w, radix5))
    assert list(hist) == [-2, -1, 0, 1, 2]
    for count in hist.values():
        assert count / w.size == pytest.approx(0.2, abs=0.01)


@pytest.mark.parametrize("x", [3, 5, 7, 9])
def test_alphabet_closure_and_monotonicity(x):
    cfg = RadixConfig(x=x)
    w = np.sort(np.random.default_rng(x).normal(size=500))
    q = quantize_weights(w, cfg).values
    assert q.min() >= cfg.w_min_q and q.max() <= cfg.w_max_q
    assert np.all(np.diff(q) >= 0)
    assert set(np.unique(q)) == set(range(cfg.w_min_q, cfg.w_max_q + 1))


def test_affine_input_invariance(radix5):
    w = np.random.default_rng(1).normal(size=1000)
    np.testing.assert_array_equal(
        quantize_weights(3.0 * w + 0.5, radix5).values,
        quantize_weights(w, radix5).values,
    )


def test_constant_tensor_is_rejected(radix5):
    with pytest.raises(ConstantTensor, match="constant tensor"):
        quantize_weights(np.full(4, 0.3), radix5)


@pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
def test_non_finite_is_rejected(radix5, bad):
    with pytest.raises(NonFinite):
        quantize_weights([0.0, bad, 1.0], radix5)


def test_alg1_widens_the_zero_bin(radix5):
    w = np.linspace(-1, 1, 10_001)
    hist = level_histogram(quantize_weights(w, radix5, mode="alg1"))
    assert hist[0] > 1.5 * hist[1]
    assert hist[-2] > 0 and hist[2] > 0


def test_explicit_range_clamps_outliers(radix5):
    q = quantize_weights([-5.0, 0.0, 5.0], radix5, w_range=(-1.0, 1.0))
    assert q.values.tolist() == [-2, 0, 2]


@pytest.mark.parametrize("mode", ["eq7", "alg1"])
def test_range_near_float_limit_stays_in_alphabet(radix5, mode):
    q = quantize_weights([-1e308, 0.0, 1e308], radix5, mode=mode)
    assert q.values.tolist() == [-2, 0, 2]


def test_dequantize_round_trips_through_quantize(radix5):
    w = np.random.default_rng(2).uniform(-0.7, 1.3, 300)
    q = quantize_weights(w, radix5)
    levels = dequantize_weights(q, w.min(), w.max(), radix5)
    assert levels.min() == pytest.approx(w.min())
    assert levels.max() == pytest.approx(w.max())
    again = quantize_weights(levels, radix5, w_range=(w.min(), w.max()))
    np.testing.assert_array_equal(again.values, q.values)


@pytest.mark.parametrize("p, expected", [(0.0, 0), (-3.0, 0), (7.9, 4), (8.0, 4), (0.5, 1), (2.5, 2)])
def test_radix_relu_bins(radix5, p, expected):
    assert radix_relu([p], 8.0, radix5).values.tolist() == [expected]


def test_radix_relu_is_monotone_and_closed(radix5):
    p = np.sort(np.random.default_rng(4).normal(scale=3, size=400))
    levels = radix_relu(p, 5.0, radix5).values
    assert levels.min() >= 0 and levels.max() <= radix5.a_max
    assert np.all(np.diff(levels) >= 0)


def test_radix_relu_saturates_huge_inputs(radix5):
    assert radix_relu([0.5, 1e30, -1e30, 1.7e308], 1.0, radix5).values.tolist() == [3, 4, 0, 4]


@pytest.mark.parametrize("pre_act_max", [0.0, -1.0])
def test_radix_relu_rejects_bad_max(radix5, pre_act_max):
    with pytest.raises(BadMax):
        radix_relu([1.0], pre_act_max, radix5)


def test_binarize():
    assert binarize([0.3, -0.2, 0.0]).values.tolist() == [1, -1, 1]
    assert binarize(np.zeros(5)).values.tolist() == [1] * 5


def test_binarize_is_scale_invariant():
    t = np.random.default_rng(5).normal(size=200)
    np.testing.assert_array_equal(binarize(t).values, binarize(7.5 * t).values)
