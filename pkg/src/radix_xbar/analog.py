"""Analog read path: input encoding, column currents, amplifier stages and decoding."""

from typing import Optional

import numpy as np

from .config import CircuitParams
from .crossbar import CrossbarProgram, conductance_matrix
from .errors import DimensionMismatch, OutOfAlphabet, ReadVoltageExceedsThreshold
from .models import AnalogReadout, QuantizedTensor


def encode_inputs(x: QuantizedTensor, params: CircuitParams) -> np.ndarray:
    """Activations to row voltages, ``V = X / S``."""
    if x.lo < 0:
        raise OutOfAlphabet(f"activations must be non-negative, alphabet is [{x.lo}, {x.hi}]")
    v = x.values.astype(np.float64) / params.s
    if v.size and v.max() >= params.dev.v_th:
        raise ReadVoltageExceedsThreshold(
            f"read voltage {v.max():g} V reaches the switching threshold "
            f"{params.dev.v_th:g} V (S={params.s:g})"
        )
    return v


def column_currents(
    program: CrossbarProgram,
    v: np.ndarray,
    params: CircuitParams,
    noise_seed: Optional[int] = None,
    run: int = 0,
    g: Optional[np.ndarray] = None,
) -> AnalogReadout:
    """Kirchhoff sums down every column, reference column included.

    ``v`` is one row-voltage vector ``(n,)`` or a pulse train ``(k, n)``.
    A precomputed conductance matrix ``g`` (reference column last) skips
    the device evaluation, so one physical array can serve many reads.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != program.n:
        raise DimensionMismatch(f"{v.shape[-1]} input voltages for {program.n} rows")
    if g is None:
        g = conductance_matrix(program, params.dev, noise_seed, run)
    currents = v @ g
    return AnalogReadout(i_tot=currents[..., :program.m], i_ref=currents[..., program.m])


def output_stage(currents: AnalogReadout, params: CircuitParams) -> AnalogReadout:
    """Inverting amplifiers on every column, then the reference subtractor."""
    v_inv = -params.r_fb * currents.i_tot
    v_ref = -params.r_fb * np.asarray(currents.i_ref)
    v_col = np.expand_dims(v_ref, -1) - v_inv
    return AnalogReadout(
        i_tot=currents.i_tot,
        i_ref=currents.i_ref,
        v_inv=v_inv,
        v_ref=v_ref,
        v_col=v_col,
    )


def simulate_mvm(
    program: CrossbarProgram,
    x: QuantizedTensor,
    params: CircuitParams,
    noise_seed: Optional[int] = None,
    run: int = 0,
) -> AnalogReadout:
    """Full read: encode, sum currents, amplify and subtract the reference."""
    v = encode_inputs(x, params)
    return output_stage(column_currents(program, v, params, noise_seed, run), params)


def decode_output(readout: AnalogReadout, params: CircuitParams) -> np.ndarray:
    """Invert ``v_col = (R / (R_m * S)) * Y``, rounding half to even."""
    if readout.v_col is None:
        raise ValueError("output stage has not been evaluated")
    return np.rint(readout.v_col / params.gain).astype(np.int64)


def integer_mvm(w_q: QuantizedTensor, x: QuantizedTensor) -> np.ndarray:
    """Exact oracle ``Y[j] = sum_i w[i, j] * X[i]`` in integer arithmetic."""
    return x.values.astype(np.int64) @ w_q.values.astype(np.int64)


def decode_error_rate(decoded: np.ndarray, expected: np.ndarray) -> float:
    decoded = np.asarray(decoded)
    if decoded.size == 0:
        return 0.0
    return float(np.mean(decoded != np.asarray(expected)))
