"""Column and device accounting for signed-weight crossbar schemes.

Area is modelled as physical columns times a unit column width; peripheral
amplifier area is not counted.
"""

from typing import List, Optional, Union

from .config import REPORTED_PRECISION_GAIN, WIRE_CURRENT_CAPACITY_A, RadixConfig
from .crossbar import CrossbarProgram
from .errors import CostError
from .models import ArrayCostReport

RADIX_REFERENCE = "radix_x_reference"
DIFFERENTIAL_PAIR = "differential_pair"
BINARY_ENCODED = "binary_encoded_differential"
SCHEMES = (RADIX_REFERENCE, DIFFERENTIAL_PAIR, BINARY_ENCODED)


def cost(
    scheme: str,
    n_rows: int,
    m_logical_columns: int,
    precision: Union[RadixConfig, int],
    program: Optional[CrossbarProgram] = None,
    column_width: float = 1.0,
) -> ArrayCostReport:
    """Physical cost of an ``n_rows x m_logical_columns`` signed weight matrix.

    Args:
        scheme: One of SCHEMES
        n_rows: Input rows
        m_logical_columns: Output neurons
        precision: RadixConfig for the radix scheme, bit count for the others
        program: Programmed array; gives the exact radix device count
        column_width: Area of one physical column in arbitrary units

    Returns:
        ArrayCostReport
    """
    if n_rows < 1 or m_logical_columns < 0:
        raise CostError(f"invalid dimensions {n_rows}x{m_logical_columns}")

    if scheme == RADIX_REFERENCE:
        if not isinstance(precision, RadixConfig):
            raise CostError("the radix scheme needs a RadixConfig")
        columns = m_logical_columns + 1
        if program is not None:
            if (program.n, program.m) != (n_rows, m_logical_columns):
                raise CostError(f"program is {program.n}x{program.m}, report asked for {n_rows}x{m_logical_columns}")
            devices = program.device_count
        else:
            # every signal cell fully populated
            devices = n_rows * m_logical_columns * precision.a_max + n_rows * precision.offset
        levels = precision.x
    elif scheme in (DIFFERENTIAL_PAIR, BINARY_ENCODED):
        bits = 1 if scheme == DIFFERENTIAL_PAIR else precision
        if not isinstance(bits, int) or isinstance(bits, bool) or bits < 1:
            raise CostError(f"{scheme} needs a positive bit count")
        if m_logical_columns < 1:
            raise CostError(f"{scheme} has no columns without a logical column")
        columns = 2 * bits * m_logical_columns
        devices = n_rows * columns
        levels = 2 ** bits
    else:
        raise CostError(f"unknown scheme {scheme!r}")

    return ArrayCostReport(
        scheme=scheme,
        columns=columns,
        devices=devices,
        precision_levels=levels,
        relative_area=columns * column_width,
    )


def compare_schemes(
    n_rows: int,
    m_logical_columns: int,
    cfg: RadixConfig,
    bits: int = 2,
    program: Optional[CrossbarProgram] = None,
) -> List[ArrayCostReport]:
    """Radix report first, then whichever baselines are defined for ``m``."""
    reports = [cost(RADIX_REFERENCE, n_rows, m_logical_columns, cfg, program)]
    if m_logical_columns >= 1:
        reports.append(cost(DIFFERENTIAL_PAIR, n_rows, m_logical_columns, 1))
        reports.append(cost(BINARY_ENCODED, n_rows, m_logical_columns, bits))
    return reports


def column_ratio(m_logical_columns: int, bits: int = 2) -> float:
    """Radix columns over ``bits``-bit differential columns, ``(m+1) / (2*bits*m)``."""
    if m_logical_columns < 1:
        raise CostError("ratio undefined without a logical column")
    return (m_logical_columns + 1) / (2 * bits * m_logical_columns)


def precision_gain(cfg: RadixConfig, bits: int = 2) -> float:
    """Extra levels of radix-X over a ``bits``-bit weight, as a fraction."""
    return cfg.x / 2 ** bits - 1.0


def reports_to_csv(reports: List[ArrayCostReport]) -> str:
    return "scheme,columns,devices,levels,relative_area\n" + "".join(r.to_csv_row() + "\n" for r in reports)


def reports_to_table(reports: List[ArrayCostReport], cfg: RadixConfig, bits: int = 2) -> str:
    """Plain-text comparison table with the ratio and precision footers."""
    header = f"{'scheme':<30} {'columns':>8} {'devices':>10} {'levels':>7} {'area':>8}"
    lines = [header, "-" * len(header)]
    for r in reports:
        lines.append(
            f"{r.scheme:<30} {r.columns:>8} {r.devices:>10} {r.precision_levels:>7} {r.relative_area:>8g}"
        )
    radix = reports[0]
    baseline = next((r for r in reports if r.scheme == BINARY_ENCODED), None)
    if baseline is not None:
        lines.append(
            f"columns: {radix.columns} vs {baseline.columns} "
            f"(ratio {radix.columns / baseline.columns:.4f}, {bits}-bit differential)"
        )
        lines.append(
            f"precision: {radix.precision_levels} vs {baseline.precision_levels} levels "
            f"(level ratio +{precision_gain(cfg, bits):.0%}, reported +{REPORTED_PRECISION_GAIN:.0%})"
        )
    else:
        lines.append("columns: reference column only, baselines undefined for m=0")
    lines.append(f"wire current capacity: {WIRE_CURRENT_CAPACITY_A * 1e3:g} mA (not simulated)")
    return "\n".join(lines) + "\n"
