import numpy as np
import pytest

from radix_xbar.config import DeviceModel, RadixConfig
from radix_xbar.crossbar import (
    CrossbarProgram,
    CrosspointCell,
    cell_conductance,
    conductance_matrix,
    count_to_weight,
    program_crossbar,
    weight_to_count,
)
from radix_xbar.errors import DimensionMismatch, FormatError, OutOfAlphabet
from radix_xbar.models import QuantizedTensor


def _random_program(cfg: RadixConfig, n: int, m: int, seed: int = 0) -> CrossbarProgram:
    w = np.random.default_rng(seed).integers(cfg.w_min_q, cfg.w_max_q + 1, (n, m))
    return program_crossbar(QuantizedTensor(w, cfg.w_min_q, cfg.w_max_q), cfg)


@pytest.mark.parametrize("w_q, count", [(-2, 0), (-1, 1), (0, 2), (1, 3), (2, 4)])
def test_weight_to_count_radix5(radix5, w_q, count):
    assert weight_to_count(w_q, radix5) == count
    assert count_to_weight(count, radix5) == w_q


@pytest.mark.parametrize("x", [3, 5, 7, 11])
def test_weight_to_count_is_a_bijection(x):
    cfg = RadixConfig(x=x)
    counts = [weight_to_count(w, cfg) for w in range(cfg.w_min_q, cfg.w_max_q + 1)]
    assert counts == list(range(x))


def test_weight_to_count_rejects_out_of_alphabet(radix5):
    with pytest.raises(OutOfAlphabet):
        weight_to_count(3, radix5)
    with pytest.raises(OutOfAlphabet):
        CrosspointCell(5, x=5)


@pytest.mark.parametrize("count, siemens", [(2, 20e-6), (0, 0.0), (4, 40e-6)])
def test_ideal_cell_conductance(count, siemens):
    assert cell_conductance(CrosspointCell(count), DeviceModel()) == pytest.approx(siemens, abs=1e-18)


def test_zero_sigma_with_seed_is_the_ideal_value():
    dev = DeviceModel()
    assert cell_conductance(CrosspointCell(4), dev, noise_seed=1234) == 4 * dev.g_on


def test_hrs_leak_adds_idle_devices():
    dev = DeviceModel(hrs_leak=True, hrs_ratio=100)
    assert cell_conductance(CrosspointCell(1), dev) == pytest.approx(1e-5 + 3e-7)
    assert cell_conductance(CrosspointCell(0), dev) == pytest.approx(4e-7)


def test_noise_is_deterministic_and_keyed():
    dev = DeviceModel(sigma_g=0.1)
    cell = CrosspointCell(3)
    a = cell_conductance(cell, dev, noise_seed=7, col=1, row=2)
    assert a == cell_conductance(cell, dev, noise_seed=7, col=1, row=2)
    assert a != cell_conductance(cell, dev, noise_seed=7, col=2, row=1)
    assert a != cell_conductance(cell, dev, noise_seed=7, run=1, col=1, row=2)
    assert a != pytest.approx(3 * dev.g_on, rel=1e-9)


def test_noise_without_seed_uses_seed_zero(radix5):
    dev = DeviceModel(sigma_g=0.1)
    cell = CrosspointCell(3)
    unseeded = cell_conductance(cell, dev)
    assert unseeded != pytest.approx(3 * dev.g_on, rel=1e-9)
    assert unseeded == cell_conductance(cell, dev, noise_seed=0)
    program = program_crossbar(QuantizedTensor(np.array([[2, -1], [0, 1]]), -2, 2), radix5)
    np.testing.assert_array_equal(conductance_matrix(program, dev), conductance_matrix(program, dev, 0))


def test_noise_factor_has_unit_mean():
    dev = DeviceModel(sigma_g=0.2)
    values = [cell_conductance(CrosspointCell(4), dev, noise_seed=11, row=r) for r in range(4000)]
    assert np.mean(values) == pytest.approx(4 * dev.g_on, rel=0.02)


def test_program_reference_column(radix5):
    w = QuantizedTensor(np.array([[2], [-1], [-1]]), -2, 2)
    program = program_crossbar(w, radix5)
    assert program.counts[:, 0].tolist() == [4, 1, 1]
    assert program.reference.tolist() == [2, 2, 2]
    assert program.device_count == 12
    assert program.cell(0, 1) == CrosspointCell(2, 5)


def test_all_zero_weights_match_reference(radix5):
    program = program_crossbar(QuantizedTensor(np.zeros((4, 3), dtype=int), -2, 2), radix5)
    assert np.all(program.counts == program.reference[:, None])


def test_counts_round_trip_to_weights(radix5):
    w = np.random.default_rng(0).integers(-2, 3, (8, 8))
    program = program_crossbar(QuantizedTensor(w, -2, 2), radix5)
    np.testing.assert_array_equal(program.weights(), w)


def test_program_needs_a_matrix(radix5):
    with pytest.raises(DimensionMismatch):
        program_crossbar(QuantizedTensor(np.zeros(3, dtype=int), -2, 2), radix5)


def test_program_rejects_foreign_alphabet(radix5):
    with pytest.raises(OutOfAlphabet):
        program_crossbar(QuantizedTensor(np.array([[3]]), -3, 3), radix5)


def test_reference_cells_are_uniform():
    cfg = RadixConfig(x=7)
    program = _random_program(cfg, 6, 4)
    g = conductance_matrix(program, DeviceModel())
    assert np.all(g[:, -1] == cfg.offset * DeviceModel().g_on)


@pytest.mark.parametrize("sigma, seed", [(0.0, None), (0.0, 5), (0.15, 5)])
def test_matrix_matches_scalar_cells(radix5, sigma, seed):
    dev = DeviceModel(sigma_g=sigma)
    program = _random_program(radix5, 5, 3, seed=1)
    g = conductance_matrix(program, dev, noise_seed=seed, run=2)
    assert g.shape == (5, 4)
    for row in range(5):
        for col in range(4):
            assert g[row, col] == cell_conductance(program.cell(row, col), dev, seed, 2, col, row)


def test_text_round_trip(tmp_path, radix5):
    program = _random_program(radix5, 4, 3)
    path = tmp_path / "array.xbar"
    program.save(path)
    loaded = CrossbarProgram.load(path)
    assert path.read_text().startswith("XBAR x=5 n=4 m=3\n")
    np.testing.assert_array_equal(loaded.counts, program.counts)
    np.testing.assert_array_equal(loaded.reference, program.reference)


@pytest.mark.parametrize("text, error", [
    ("GRID x=5 n=1 m=1\n2 2\n", FormatError),
    ("XBAR x=5 n=2 m=1\n2 2\n", FormatError),
    ("XBAR x=5 n=1 m=1\n2 3\n", FormatError),
    ("XBAR x=5 n=1 m=1\n7 2\n", OutOfAlphabet),
])
def test_from_text_rejects_bad_programs(text, error):
    with pytest.raises(error):
        CrossbarProgram.from_text(text)
