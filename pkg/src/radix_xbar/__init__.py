"""Radix-X Memristor Crossbar Simulator.

Quantizes CNN weights to an odd radix, programs them onto parallel-connected
memristor crosspoints with a shared reference column, and simulates the
analog read path, convolution, quantization-aware training and array cost.
"""

# Parameters and errors
from .config import CircuitParams, DeviceModel, RadixConfig, RunConfig
from .errors import RadixXbarError

# Data records
from .models import (
    AnalogReadout,
    ArrayCostReport,
    ConvPlan,
    ConvReport,
    QuantizedTensor,
    TraceRow,
)

# Quantization and the array
from .quantizer import binarize, dequantize_weights, quantize_weights, radix_relu
from .crossbar import CrossbarProgram, CrosspointCell, cell_conductance, program_crossbar

# Analog read path and convolution
from .analog import decode_output, integer_mvm, simulate_mvm
from .conv import convolve_crossbar, im2col, reference_convolve, sobel_kernel

# Training and cost
from .trainer import QatState, TinyNet, backward_ste, forward, train
from .cost import compare_schemes, cost

__version__ = "0.1.0"
__all__ = [
    # Parameters and errors
    "RadixConfig",
    "DeviceModel",
    "CircuitParams",
    "RunConfig",
    "RadixXbarError",
    # Data records
    "QuantizedTensor",
    "AnalogReadout",
    "ConvPlan",
    "ConvReport",
    "ArrayCostReport",
    "TraceRow",
    # Quantization and the array
    "quantize_weights",
    "dequantize_weights",
    "radix_relu",
    "binarize",
    "CrosspointCell",
    "CrossbarProgram",
    "program_crossbar",
    "cell_conductance",
    # Analog read path and convolution
    "simulate_mvm",
    "decode_output",
    "integer_mvm",
    "im2col",
    "convolve_crossbar",
    "reference_convolve",
    "sobel_kernel",
    # Training and cost
    "TinyNet",
    "QatState",
    "forward",
    "backward_ste",
    "train",
    "cost",
    "compare_schemes",
]
