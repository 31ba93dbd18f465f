"""2-D convolution on the crossbar through im2col lowering."""

import math
from typing import Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .analog import column_currents, decode_output, encode_inputs, output_stage
from .config import CircuitParams, RadixConfig, SOBEL_KERNEL
from .crossbar import conductance_matrix, program_crossbar
from .errors import InvalidSetting, KernelTooLarge, OutOfAlphabet, ShapeMismatch
from .models import ConvPlan, ConvReport, QuantizedTensor


def sobel_kernel(cfg: Optional[RadixConfig] = None) -> QuantizedTensor:
    cfg = cfg or RadixConfig(x=5)
    return QuantizedTensor(np.array(SOBEL_KERNEL, dtype=np.int64), cfg.w_min_q, cfg.w_max_q)


def as_image_u8(img) -> np.ndarray:
    """Validate an ``h x w`` or ``c x h x w`` image of 8-bit pixels."""
    pixels = np.asarray(img)
    if pixels.ndim not in (2, 3):
        raise ShapeMismatch(f"image must be 2-D or 3-D, got shape {pixels.shape}")
    if min(pixels.shape[-2:]) < 1:
        raise ShapeMismatch(f"empty image {pixels.shape}")
    if not np.issubdtype(pixels.dtype, np.integer):
        raise OutOfAlphabet(f"pixels must be integers, got {pixels.dtype}")
    if pixels.min() < 0 or pixels.max() > 255:
        raise OutOfAlphabet("pixels outside [0, 255]")
    return pixels.astype(np.int64)


def _channels(array: np.ndarray) -> np.ndarray:
    return array[np.newaxis] if array.ndim == 2 else array


def im2col(img, kh: int, kw: int) -> np.ndarray:
    """Patch matrix ``(n_patches, c*kh*kw)``, output positions row-major.

    Channels are concatenated down the patch, channel-major, matching the
    flattening order of a ``(c, kh, kw)`` kernel.
    """
    x = _channels(np.asarray(img))
    c, h, w = x.shape
    if kh > h or kw > w or kh < 1 or kw < 1:
        raise KernelTooLarge(f"{kh}x{kw} kernel does not fit a {h}x{w} image")
    windows = sliding_window_view(x, (kh, kw), axis=(1, 2))
    oh, ow = h - kh + 1, w - kw + 1
    return windows.transpose(1, 2, 0, 3, 4).reshape(oh * ow, c * kh * kw)


def pixels_to_activations(img, cfg: RadixConfig) -> QuantizedTensor:
    """Linear map of 0..255 onto 0..a_max; white encodes to ``a_max / S`` volts."""
    pixels = as_image_u8(img)
    return QuantizedTensor(np.rint(pixels * cfg.a_max / 255).astype(np.int64), 0, cfg.a_max)


def reference_convolve(acts: np.ndarray, kernel: np.ndarray, flip: bool = False) -> np.ndarray:
    """Integer valid-mode cross-correlation (or convolution with ``flip``)."""
    x = _channels(np.asarray(acts, dtype=np.int64))
    k = _channels(np.asarray(kernel, dtype=np.int64))
    if flip:
        k = k[:, ::-1, ::-1]
    c, h, w = x.shape
    kc, kh, kw = k.shape
    if kc != c:
        raise ShapeMismatch(f"kernel has {kc} channels, image has {c}")
    if kh > h or kw > w:
        raise KernelTooLarge(f"{kh}x{kw} kernel does not fit a {h}x{w} image")
    oh, ow = h - kh + 1, w - kw + 1
    out = np.zeros((oh, ow), dtype=np.int64)
    for ch in range(c):
        for a in range(kh):
            for b in range(kw):
                out += k[ch, a, b] * x[ch, a:a + oh, b:b + ow]
    return out


def plan_convolution(
    image_shape: Tuple[int, ...],
    kernel_q: QuantizedTensor,
    tile_rows: Optional[int] = None,
    columns: Optional[int] = None,
    flip: bool = False,
) -> ConvPlan:
    """Read-cycle accounting for one image.

    Each patch is one column read. ``columns`` patches share a read cycle and
    a kernel taller than ``tile_rows`` is split into row passes, so
    ``cycles = ceil(rows / tile_rows) * ceil(n_patches / columns)``.
    """
    kh, kw = kernel_q.shape[-2:]
    h, w = image_shape[-2:]
    if kh > h or kw > w:
        raise KernelTooLarge(f"{kh}x{kw} kernel does not fit a {h}x{w} image")
    if tile_rows is not None and tile_rows < 1:
        raise InvalidSetting(f"tile_rows must be positive, got {tile_rows}")
    if columns is not None and columns < 1:
        raise InvalidSetting(f"columns must be positive, got {columns}")
    plan = ConvPlan(
        kernel_q=kernel_q,
        out_shape=(h - kh + 1, w - kw + 1),
        tile_rows=tile_rows,
        columns=columns,
        flip=flip,
    )
    plan.row_passes = 1 if tile_rows is None else math.ceil(plan.rows / tile_rows)
    plan.batches = 1 if columns is None else math.ceil(plan.n_patches / columns)
    return plan


def convolve_crossbar(
    img,
    kernel_q: QuantizedTensor,
    params: CircuitParams,
    noise_seed: Optional[int] = None,
    tile_rows: Optional[int] = None,
    columns: Optional[int] = None,
    flip: bool = False,
    run: int = 0,
) -> Tuple[np.ndarray, ConvPlan, ConvReport]:
    """Convolve an image by reading every patch through the analog path.

    The kernel is programmed down one signal column beside the reference
    column. Row passes are decoded separately and their integer partial sums
    accumulated, as a digital back end behind the array would.

    Returns:
        Decoded output image, the plan, and the peak-current report
    """
    cfg = RadixConfig(x=kernel_q.hi - kernel_q.lo + 1)
    pixels = as_image_u8(img)
    kernel = _channels(kernel_q.values)
    if kernel.shape[0] != _channels(pixels).shape[0]:
        raise ShapeMismatch(f"kernel has {kernel.shape[0]} channels, image has {_channels(pixels).shape[0]}")
    if flip:
        kernel = kernel[:, ::-1, ::-1]
    plan = plan_convolution(pixels.shape, kernel_q, tile_rows, columns, flip)

    acts = pixels_to_activations(pixels, cfg)
    patches = im2col(acts.values, kernel.shape[1], kernel.shape[2])
    column = QuantizedTensor(kernel.reshape(-1, 1), cfg.w_min_q, cfg.w_max_q)
    program = program_crossbar(column, cfg)
    g = conductance_matrix(program, params.dev, noise_seed, run)

    step = plan.rows if tile_rows is None else tile_rows
    decoded = np.zeros(plan.n_patches, dtype=np.int64)
    report = ConvReport(column_currents_a=[0.0] * program.m)
    counts = program.all_counts()
    for start in range(0, plan.rows, step):
        stop = min(start + step, plan.rows)
        x = QuantizedTensor(patches[:, start:stop], 0, cfg.a_max)
        v = encode_inputs(x, params)
        currents = column_currents(program.row_slice(start, stop), v, params, g=g[start:stop])
        readout = output_stage(currents, params)
        decoded += decode_output(readout, params)[:, 0]

        col_peak = np.abs(readout.i_tot).max(axis=0)
        report.column_currents_a = [max(a, float(b)) for a, b in zip(report.column_currents_a, col_peak)]
        report.peak_reference_current_a = max(
            report.peak_reference_current_a, float(np.abs(readout.i_ref).max(initial=0.0))
        )
        with np.errstate(divide="ignore", invalid="ignore"):
            per_device = np.where(counts[start:stop] > 0, g[start:stop] / counts[start:stop], 0.0)
        device_peak = (v.max(axis=0, initial=0.0) * per_device.max(axis=1)).max(initial=0.0)
        report.peak_device_current_a = max(report.peak_device_current_a, float(device_peak))
    report.peak_column_current_a = max(report.column_currents_a, default=0.0)
    return decoded.reshape(plan.out_shape), plan, report
