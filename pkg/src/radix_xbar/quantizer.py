"""Radix-X quantization of weights and activations, plus the BNN sign baseline."""

from typing import Dict, Optional, Tuple

import numpy as np

from .config import RadixConfig
from .errors import BadMax, ConstantTensor, NonFinite
from .models import QuantizedTensor

MODES = ("eq7", "alg1")


def as_real_tensor(values) -> np.ndarray:
    """Convert to a float64 array and reject NaN/inf."""
    array = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(array)):
        raise NonFinite("tensor contains NaN or infinite values")
    return array


def calibration_range(weights: np.ndarray) -> Tuple[float, float]:
    """Observed (w_min, w_max) of a tensor."""
    if weights.size == 0:
        raise ConstantTensor("cannot quantize an empty tensor")
    return float(weights.min()), float(weights.max())


def quantize_weights(
    weights,
    cfg: RadixConfig,
    mode: str = "eq7",
    w_range: Optional[Tuple[float, float]] = None,
) -> QuantizedTensor:
    """Map real weights onto the signed radix-X alphabet.

    ``eq7`` splits ``[w_min, w_max]`` into ``x`` equal-width bins, with
    ``w_max`` itself clamped into the top bin. ``alg1`` normalizes to
    ``[-x/2, +x/2]`` and truncates toward zero, which makes the zero bin twice
    as wide as the others.

    Args:
        weights: Real-valued weights of any shape
        cfg: Radix configuration
        mode: "eq7" (default) or "alg1"
        w_range: Calibration range; defaults to the tensor's own min/max.
            Values outside it are clamped to its ends.

    Returns:
        QuantizedTensor bounded by (w_min_q, w_max_q)
    """
    if mode not in MODES:
        raise ValueError(f"unknown quantization mode {mode!r}")
    w = as_real_tensor(weights)
    w_min, w_max = calibration_range(w) if w_range is None else map(float, w_range)
    # halved so that w_max - w_min cannot overflow near the float64 limit
    span = w_max / 2 - w_min / 2
    if not span > 0:
        raise ConstantTensor("constant tensor: weight range is zero")
    w = np.clip(w, w_min, w_max)
    normalized = np.clip((w / 2 - w_min / 2) / span, 0.0, 1.0)

    if mode == "eq7":
        k = np.floor(normalized * cfg.x).astype(np.int64)
        k = np.minimum(k, cfg.x - 1)
        q = k + cfg.w_min_q
    else:
        q = np.trunc(normalized * cfg.x - cfg.x / 2).astype(np.int64)
        q = np.clip(q, cfg.w_min_q, cfg.w_max_q)
    return QuantizedTensor(q, cfg.w_min_q, cfg.w_max_q)


def dequantize_weights(q: QuantizedTensor, w_min: float, w_max: float, cfg: RadixConfig) -> np.ndarray:
    """Evenly spaced representatives from ``w_min`` to ``w_max``, one per level.

    The endpoints are kept, so quantizing the result again with eq7 returns
    ``q`` unchanged.
    """
    step = (w_max - w_min) / (cfg.x - 1)
    return w_min + (q.values - cfg.w_min_q) * step


def radix_relu(pre_activation, pre_act_max: float, cfg: RadixConfig) -> QuantizedTensor:
    """Bounded ReLU onto ``{0, ..., a_max}``.

    Non-positive inputs give 0; ``(0, pre_act_max]`` is split into ``x - 1``
    equal bins numbered from 1, with ``pre_act_max`` clamped into the top bin.
    """
    if not pre_act_max > 0:
        raise BadMax(f"pre_act_max must be positive, got {pre_act_max}")
    raw = as_real_tensor(pre_activation)
    p = np.clip(raw, 0.0, pre_act_max)
    levels = np.floor(p * cfg.a_max / pre_act_max).astype(np.int64) + 1
    levels = np.minimum(levels, cfg.a_max)
    levels = np.where(raw <= 0, 0, levels)
    return QuantizedTensor(levels, 0, cfg.a_max)


def binarize(t) -> QuantizedTensor:
    """Sign binarization: ``>= 0`` maps to +1, everything else to -1."""
    values = as_real_tensor(t)
    return QuantizedTensor(np.where(values >= 0, 1, -1), -1, 1)


def level_histogram(q: QuantizedTensor) -> Dict[int, int]:
    """Count of every alphabet level, including the empty ones."""
    counts = np.bincount((q.values - q.lo).ravel(), minlength=q.hi - q.lo + 1)
    return {level: int(counts[level - q.lo]) for level in range(q.lo, q.hi + 1)}
