import math

import numpy as np
import pytest

from mtfa.signals import (GridMismatch, SampledSignal, UniformGrid, ZeroSignal, add_awgn, align_phase,
                          generate, metrics, read_csv, write_csv)


def _at(kind, x):
    return generate(kind, UniformGrid(x, 1.0, 1)).values[0]


def test_generator_values():
    assert _at("LFM", 0.0) == 1 + 0j
    assert abs(_at("CExp", 1.0) - (-1 + 0j)) < 1e-15
    assert abs(_at("GaussLFM", -1.0) - (1 + 0j)) < 1e-14


def test_unknown_kind():
    with pytest.raises(ValueError):
        generate("Sine", UniformGrid.symmetric(5, 1.0))


def test_grid_constructors():
    g = UniformGrid.from_interval(-5, 5, 30)
    assert g.count == 300 and g.start == -5 and g.contains_zero
    s = UniformGrid.symmetric(7, 0.5)
    assert np.allclose(s.points, [-1.5, -1, -0.5, 0, 0.5, 1, 1.5])
    assert s.zero_index() == 3
    with pytest.raises(ValueError):
        UniformGrid(0.0, -1.0, 4)


def test_awgn_infinite_snr_is_identity():
    f = generate("LFM", UniformGrid.from_interval(-5, 5, 30))
    assert add_awgn(f, math.inf, 1) is f


def test_awgn_realized_snr():
    f = generate("LFM", UniformGrid.from_interval(-50, 50, 100))
    assert f.grid.count == 10_000
    g = add_awgn(f, 0.0, 123)
    noise = g.values - f.values
    snr = 10 * np.log10(np.mean(np.abs(f.values) ** 2) / np.mean(np.abs(noise) ** 2))
    assert abs(snr) <= 0.3


def test_awgn_deterministic():
    f = generate("GaussLFM", UniformGrid.from_interval(-5, 5, 50))
    a, b = add_awgn(f, 2.0, 9, 4), add_awgn(f, 2.0, 9, 4)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, add_awgn(f, 2.0, 9, 5).values)


def test_awgn_zero_signal():
    z = SampledSignal(UniformGrid.symmetric(5, 1.0), np.zeros(5, complex))
    with pytest.raises(ZeroSignal):
        add_awgn(z, 0.0, 1)


def test_metrics_oracles():
    f = generate("LFM", UniformGrid.from_interval(-5, 5, 30))
    m = metrics(f, f)
    assert m.mse == 0 and m.psnr == math.inf
    zero = SampledSignal(f.grid, np.zeros(f.grid.count, complex))
    assert metrics(zero, f).mse == pytest.approx(1.0, abs=1e-12)
    shifted = SampledSignal(f.grid, f.values + 1e-2)
    assert metrics(shifted, f).mse == pytest.approx(1e-4, rel=1e-9)


def test_metrics_grid_mismatch():
    a = generate("LFM", UniformGrid.symmetric(5, 1.0))
    b = generate("LFM", UniformGrid.symmetric(5, 0.5))
    with pytest.raises(GridMismatch):
        metrics(a, b)


def test_align_phase_removes_constant():
    f = generate("GaussLFM", UniformGrid.from_interval(-5, 5, 50))
    rotated = SampledSignal(f.grid, f.values * np.exp(1.3j))
    assert np.allclose(align_phase(rotated, f).values, f.values, atol=1e-13)


def test_nonfinite_rejected():
    with pytest.raises(ValueError):
        SampledSignal(UniformGrid.symmetric(3, 1.0), np.array([0, np.inf, 0], complex))


def test_csv_round_trip(tmp_path):
    f = generate("GaussLFM", UniformGrid.from_interval(-5, 5, 20))
    write_csv(f, tmp_path / "s.csv")
    g = read_csv(tmp_path / "s.csv")
    assert g.grid.same_as(f.grid)
    assert np.array_equal(g.values, f.values)
