"""Parameter models for the radix-X quantizer and the crossbar circuit."""

import math
from pathlib import Path
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .errors import ReadVoltageExceedsThreshold

# Sobel operator in radix-5 form
SOBEL_KERNEL = [
    [1, 2, 1],
    [0, 0, 0],
    [-1, -2, -1],
]

# Values measured on the fabricated 4x4 array
MEASURED_PEAK_COLUMN_CURRENT_A = 4.0e-6
MEASURED_PEAK_DEVICE_CURRENT_A = 1.6e-6
REPORTED_PRECISION_GAIN = 0.20
WIRE_CURRENT_CAPACITY_A = 0.1


class RadixConfig(BaseModel):
    """Radix X and the integer alphabets derived from it."""

    model_config = ConfigDict(frozen=True)

    x: int = Field(default=5, ge=3)

    @field_validator("x")
    @classmethod
    def _odd(cls, value: int) -> int:
        if value % 2 == 0:
            raise ValueError(f"radix must be odd, got {value}")
        return value

    @property
    def w_min_q(self) -> int:
        return -(self.x - 1) // 2

    @property
    def w_max_q(self) -> int:
        return (self.x - 1) // 2

    @property
    def a_max(self) -> int:
        return self.x - 1

    @property
    def offset(self) -> int:
        """Level shift |w_min_q| applied to every weight on the array."""
        return abs(self.w_min_q)


class DeviceModel(BaseModel):
    """Static electrical model of one LRS memristor."""

    model_config = ConfigDict(frozen=True)

    r_m: float = Field(default=100e3, gt=0)
    hrs_ratio: float = Field(default=100.0, ge=1)
    sigma_g: float = Field(default=0.0, ge=0)
    v_th: float = Field(default=0.5, gt=0)
    hrs_leak: bool = False

    @property
    def g_on(self) -> float:
        return 1.0 / self.r_m

    @property
    def g_off(self) -> float:
        if math.isinf(self.hrs_ratio):
            return 0.0
        return 1.0 / (self.hrs_ratio * self.r_m)


class CircuitParams(BaseModel):
    """Peripheral circuit constants around the array."""

    model_config = ConfigDict(frozen=True)

    dev: DeviceModel = Field(default_factory=DeviceModel)
    r_fb: float = Field(default=10.0, gt=0)
    s: float = Field(default=10.0, gt=0)

    @property
    def gain(self) -> float:
        """Volts of v_col per unit of integer MVM output."""
        return self.r_fb / (self.dev.r_m * self.s)

    def check_radix(self, cfg: RadixConfig) -> None:
        """Reject parameters where the largest activation disturbs the array."""
        v_peak = cfg.a_max / self.s
        if v_peak >= self.dev.v_th:
            raise ReadVoltageExceedsThreshold(
                f"read voltage {v_peak:g} V for activation {cfg.a_max} "
                f"reaches the switching threshold {self.dev.v_th:g} V (S={self.s:g})"
            )


class RunConfig(BaseModel):
    """Validated CLI invocation."""

    model_config = ConfigDict(frozen=True)

    command: str
    seed: int = Field(default=0, ge=0, lt=2**64)
    inputs: List[Path] = Field(default_factory=list)
    output: Optional[Path] = None
    quiet: bool = False

    @model_validator(mode="after")
    def _inputs_exist(self) -> "RunConfig":
        missing = [str(p) for p in self.inputs if not p.exists()]
        if missing:
            raise FileNotFoundError(f"input file not found: {', '.join(missing)}")
        return self
