"""Data records shared across the simulator."""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple
import json

import numpy as np

from .config import MEASURED_PEAK_COLUMN_CURRENT_A, MEASURED_PEAK_DEVICE_CURRENT_A
from .errors import OutOfAlphabet


@dataclass(frozen=True)
class QuantizedTensor:
    """Integer tensor whose values lie inside ``[lo, hi]``."""
    values: np.ndarray
    lo: int
    hi: int

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.size and not np.issubdtype(values.dtype, np.integer):
            raise TypeError(f"quantized values must be integers, got {values.dtype}")
        values = values.astype(np.int64, copy=False)
        if values.size and (values.min() < self.lo or values.max() > self.hi):
            raise OutOfAlphabet(
                f"values span [{values.min()}, {values.max()}], "
                f"outside the alphabet [{self.lo}, {self.hi}]"
            )
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.values.shape

    @property
    def bounds(self) -> Tuple[int, int]:
        return (self.lo, self.hi)

    def to_json(self) -> str:
        """Serialize to JSON."""
        return json.dumps({
            "shape": list(self.shape),
            "bounds": [self.lo, self.hi],
            "values": self.values.ravel().tolist(),
        })


def _fmt(value: float) -> str:
    return f"{value:.9e}"


@dataclass
class AnalogReadout:
    """Column currents and stage voltages for one pulse or a pulse train.

    Signal arrays have shape ``(m,)`` for a single input vector or
    ``(k, m)`` for ``k`` pulses; reference quantities drop the last axis.
    """
    i_tot: np.ndarray
    i_ref: np.ndarray
    v_inv: Optional[np.ndarray] = None
    v_ref: Optional[np.ndarray] = None
    v_col: Optional[np.ndarray] = None

    @property
    def pulses(self) -> int:
        return 1 if np.ndim(self.i_tot) == 1 else int(np.shape(self.i_tot)[0])

    def pulse(self, k: int) -> "AnalogReadout":
        """Readout of a single pulse from a pulse train."""
        if np.ndim(self.i_tot) == 1:
            if k != 0:
                raise IndexError(k)
            return self
        pick = lambda a: None if a is None else np.asarray(a)[k]  # noqa: E731
        return AnalogReadout(
            i_tot=pick(self.i_tot), i_ref=pick(self.i_ref),
            v_inv=pick(self.v_inv), v_ref=pick(self.v_ref), v_col=pick(self.v_col),
        )

    def to_csv(self, y_hat: Optional[np.ndarray] = None) -> str:
        """CSV export of a single-pulse readout."""
        if np.ndim(self.i_tot) != 1:
            raise ValueError("to_csv expects a single-pulse readout; use pulse(k)")
        if self.v_col is None:
            raise ValueError("output stage has not been evaluated")
        lines = ["col,i_tot_A,v_inv_V,v_col_V,y_hat"]
        for j in range(len(self.i_tot)):
            y = "" if y_hat is None else str(int(y_hat[j]))
            lines.append(
                f"{j},{_fmt(self.i_tot[j])},{_fmt(self.v_inv[j])},{_fmt(self.v_col[j])},{y}"
            )
        lines.append(f"ref,{_fmt(float(self.i_ref))},{_fmt(float(self.v_ref))},,")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        """Serialize to JSON."""
        as_list = lambda a: None if a is None else np.asarray(a).tolist()  # noqa: E731
        return json.dumps({
            "i_tot": as_list(self.i_tot),
            "i_ref": as_list(self.i_ref),
            "v_inv": as_list(self.v_inv),
            "v_ref": as_list(self.v_ref),
            "v_col": as_list(self.v_col),
        })


@dataclass
class ConvPlan:
    """How a kernel is laid onto the array and how many reads it takes."""
    kernel_q: QuantizedTensor
    out_shape: Tuple[int, int]
    tile_rows: Optional[int] = None
    columns: Optional[int] = None
    stride: int = 1
    padding: int = 0
    flip: bool = False
    row_passes: int = 1
    batches: int = 1

    @property
    def n_patches(self) -> int:
        return self.out_shape[0] * self.out_shape[1]

    @property
    def rows(self) -> int:
        return int(self.kernel_q.values.size)

    @property
    def cycles(self) -> int:
        return self.row_passes * self.batches

    def to_json(self) -> str:
        """Serialize to JSON."""
        return json.dumps({
            "kernel": self.kernel_q.values.tolist(),
            "out_shape": list(self.out_shape),
            "tile_rows": self.tile_rows,
            "columns": self.columns,
            "stride": self.stride,
            "padding": self.padding,
            "flip": self.flip,
            "row_passes": self.row_passes,
            "batches": self.batches,
            "cycles": self.cycles,
        })


@dataclass
class ConvReport:
    """Peak currents seen while convolving, next to the measured references."""
    peak_column_current_a: float = 0.0
    peak_reference_current_a: float = 0.0
    peak_device_current_a: float = 0.0
    column_currents_a: List[float] = field(default_factory=list)
    reference_column_current_a: float = MEASURED_PEAK_COLUMN_CURRENT_A
    reference_device_current_a: float = MEASURED_PEAK_DEVICE_CURRENT_A
    band: float = 0.25

    def within_band(self, value: float, ref: float) -> bool:
        return abs(value - ref) <= self.band * ref

    @property
    def column_within_band(self) -> bool:
        return self.within_band(self.peak_column_current_a, self.reference_column_current_a)

    @property
    def device_within_band(self) -> bool:
        return self.within_band(self.peak_device_current_a, self.reference_device_current_a)

    @property
    def device_vs_column_reference(self) -> bool:
        """Single-device peak against the measured column peak."""
        return self.within_band(self.peak_device_current_a, self.reference_column_current_a)

    def merge(self, other: "ConvReport") -> "ConvReport":
        """Combine reports from several images by taking the peaks."""
        if self.column_currents_a and other.column_currents_a:
            columns = [max(a, b) for a, b in zip(self.column_currents_a, other.column_currents_a)]
        else:
            columns = list(self.column_currents_a or other.column_currents_a)
        return ConvReport(
            peak_column_current_a=max(self.peak_column_current_a, other.peak_column_current_a),
            peak_reference_current_a=max(self.peak_reference_current_a, other.peak_reference_current_a),
            peak_device_current_a=max(self.peak_device_current_a, other.peak_device_current_a),
            column_currents_a=columns,
            reference_column_current_a=self.reference_column_current_a,
            reference_device_current_a=self.reference_device_current_a,
            band=self.band,
        )

    def to_json(self) -> str:
        """Serialize to JSON."""
        return json.dumps({
            "peak_column_current_a": self.peak_column_current_a,
            "peak_reference_current_a": self.peak_reference_current_a,
            "peak_device_current_a": self.peak_device_current_a,
            "column_currents_a": self.column_currents_a,
            "reference_column_current_a": self.reference_column_current_a,
            "reference_device_current_a": self.reference_device_current_a,
            "column_within_band": self.column_within_band,
            "device_within_band": self.device_within_band,
            "device_vs_column_reference": self.device_vs_column_reference,
        })


@dataclass
class ArrayCostReport:
    """Physical column and device counts for one array scheme."""
    scheme: str
    columns: int
    devices: int
    precision_levels: int
    relative_area: float

    def to_csv_row(self) -> str:
        return f"{self.scheme},{self.columns},{self.devices},{self.precision_levels},{self.relative_area:g}"

    def to_json(self) -> str:
        """Serialize to JSON."""
        return json.dumps(self.__dict__)


@dataclass
class TraceRow:
    """Accuracy after one training epoch."""
    epoch: int
    mode: str
    train_acc: float
    val_acc: float

    def to_csv_row(self) -> str:
        return f"{self.epoch},{self.mode},{self.train_acc:.6f},{self.val_acc:.6f}"

    def to_json(self) -> str:
        """Serialize to JSON."""
        return json.dumps(self.__dict__)


def trace_to_csv(rows: List[TraceRow]) -> str:
    return "epoch,mode,train_acc,val_acc\n" + "".join(r.to_csv_row() + "\n" for r in rows)
