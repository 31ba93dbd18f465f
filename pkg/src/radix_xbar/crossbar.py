"""Crossbar programs: parallel memristor counts per crosspoint plus the reference column."""

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .config import DeviceModel, RadixConfig
from .errors import DimensionMismatch, FormatError, OutOfAlphabet
from .models import QuantizedTensor


@dataclass(frozen=True)
class CrosspointCell:
    """Number of LRS memristors wired in parallel at one junction."""
    active_count: int
    x: int = 5

    def __post_init__(self):
        if not 0 <= self.active_count <= self.x - 1:
            raise OutOfAlphabet(
                f"crosspoint holds {self.active_count} devices, radix-{self.x} allows 0..{self.x - 1}"
            )


def weight_to_count(w_q: int, cfg: RadixConfig) -> int:
    """Level-shift a signed weight into a parallel device count."""
    if not cfg.w_min_q <= w_q <= cfg.w_max_q:
        raise OutOfAlphabet(f"weight {w_q} outside [{cfg.w_min_q}, {cfg.w_max_q}]")
    return int(w_q) + cfg.offset


def count_to_weight(count: int, cfg: RadixConfig) -> int:
    if not 0 <= count <= cfg.a_max:
        raise OutOfAlphabet(f"count {count} outside [0, {cfg.a_max}]")
    return int(count) - cfg.offset


@dataclass(frozen=True)
class CrossbarProgram:
    """Hardware image of an n x m weight matrix.

    ``counts`` holds the signal cells, ``reference`` the zero-weight column
    whose every cell carries ``|w_min_q|`` devices.
    """
    counts: np.ndarray
    reference: np.ndarray
    cfg: RadixConfig

    @property
    def n(self) -> int:
        return int(self.counts.shape[0])

    @property
    def m(self) -> int:
        return int(self.counts.shape[1])

    @property
    def device_count(self) -> int:
        return int(self.counts.sum() + self.reference.sum())

    def cell(self, row: int, col: int) -> CrosspointCell:
        """Cell at ``(row, col)``; ``col == m`` addresses the reference column."""
        count = self.reference[row] if col == self.m else self.counts[row, col]
        return CrosspointCell(int(count), self.cfg.x)

    def all_counts(self) -> np.ndarray:
        """n x (m+1) counts with the reference column last."""
        return np.column_stack([self.counts, self.reference])

    def weights(self) -> np.ndarray:
        return self.counts - self.cfg.offset

    def row_slice(self, start: int, stop: int) -> "CrossbarProgram":
        return CrossbarProgram(self.counts[start:stop], self.reference[start:stop], self.cfg)

    def to_text(self) -> str:
        """Header line then one line per row, reference count last."""
        lines = [f"XBAR x={self.cfg.x} n={self.n} m={self.m}"]
        for row in self.all_counts():
            lines.append(" ".join(str(int(c)) for c in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "CrossbarProgram":
        lines = text.strip("\n").split("\n")
        header = lines[0].split()
        if not header or header[0] != "XBAR":
            raise FormatError(f"bad crossbar header {lines[0]!r}")
        try:
            fields = dict(item.split("=", 1) for item in header[1:])
            cfg = RadixConfig(x=int(fields["x"]))
            n, m = int(fields["n"]), int(fields["m"])
            rows = [[int(c) for c in line.split()] for line in lines[1:]]
        except (KeyError, ValueError) as e:
            raise FormatError(f"cannot parse crossbar program: {e}") from e
        grid = np.array(rows, dtype=np.int64).reshape(-1, m + 1) if rows else np.zeros((0, m + 1), np.int64)
        if grid.shape != (n, m + 1):
            raise FormatError(f"expected {n} rows of {m + 1} counts, got {grid.shape}")
        if grid.size and (grid.min() < 0 or grid.max() > cfg.a_max):
            raise OutOfAlphabet(f"counts outside [0, {cfg.a_max}]")
        if np.any(grid[:, m] != cfg.offset):
            raise FormatError(f"reference column must hold {cfg.offset} devices per row")
        return cls(grid[:, :m].copy(), grid[:, m].copy(), cfg)

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path: Union[str, Path]) -> "CrossbarProgram":
        return cls.from_text(Path(path).read_text())


def program_crossbar(w_q: QuantizedTensor, cfg: RadixConfig) -> CrossbarProgram:
    """Lay a 2-D quantized weight matrix onto the array."""
    values = np.asarray(w_q.values)
    if values.ndim != 2:
        raise DimensionMismatch(f"weight matrix must be 2-D, got shape {values.shape}")
    if values.size and (values.min() < cfg.w_min_q or values.max() > cfg.w_max_q):
        raise OutOfAlphabet(
            f"weights span [{values.min()}, {values.max()}], radix-{cfg.x} allows "
            f"[{cfg.w_min_q}, {cfg.w_max_q}]"
        )
    counts = values.astype(np.int64) + cfg.offset
    reference = np.full(values.shape[0], cfg.offset, dtype=np.int64)
    return CrossbarProgram(counts, reference, cfg)


def _device_factors(n_devices: int, sigma: float, noise_seed: int, run: int, col: int, row: int) -> np.ndarray:
    # one independent stream per (run, column, row); one draw per device
    rng = np.random.default_rng(np.random.SeedSequence(noise_seed, spawn_key=(run, col, row)))
    s2 = np.log1p(sigma * sigma)
    return np.exp(rng.standard_normal(n_devices) * np.sqrt(s2) - s2 / 2)


def cell_conductance(
    cell: CrosspointCell,
    dev: DeviceModel,
    noise_seed: Optional[int] = None,
    run: int = 0,
    col: int = 0,
    row: int = 0,
) -> float:
    """Equivalent conductance of one crosspoint in siemens.

    The first ``active_count`` of the ``x - 1`` device slots are LRS. With
    ``hrs_leak`` the remaining slots are present at HRS; otherwise they are
    open. With ``sigma_g > 0`` each device is scaled by a mean-one lognormal
    factor drawn from the stream keyed by ``(noise_seed, run, col, row)``;
    a missing seed means seed 0.
    """
    slots = cell.x - 1
    idle = slots - cell.active_count
    if dev.sigma_g == 0:
        g = cell.active_count * dev.g_on
        if dev.hrs_leak:
            g = g + idle * dev.g_off
        return float(g)
    g = np.zeros(slots)
    g[:cell.active_count] = dev.g_on
    if dev.hrs_leak:
        g[cell.active_count:] = dev.g_off
    seed = 0 if noise_seed is None else noise_seed
    g = g * _device_factors(slots, dev.sigma_g, seed, run, col, row)
    return float(g.sum())


def conductance_matrix(
    program: CrossbarProgram,
    dev: DeviceModel,
    noise_seed: Optional[int] = None,
    run: int = 0,
) -> np.ndarray:
    """n x (m+1) conductances, reference column last."""
    counts = program.all_counts()
    if dev.sigma_g == 0:
        g = counts * dev.g_on
        if dev.hrs_leak:
            g = g + (program.cfg.a_max - counts) * dev.g_off
        return g.astype(np.float64)
    g = np.empty(counts.shape, dtype=np.float64)
    for row in range(counts.shape[0]):
        for col in range(counts.shape[1]):
            cell = CrosspointCell(int(counts[row, col]), program.cfg.x)
            g[row, col] = cell_conductance(cell, dev, noise_seed, run, col, row)
    return g
