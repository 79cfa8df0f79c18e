import cmath

import numpy as np
import pytest
from scipy import fft as sfft

from mtfa import metaplectic as mp
from mtfa import symplectic as sp
from mtfa.bench import example
from mtfa.signals import SampledSignal, UniformGrid, generate
from mtfa.tfd import TFDistribution, aligned_residual, correlation, rel_residual

GAUSS_GRID = UniformGrid(-8.0, 16.0 / 1024, 1024)


def gaussian(grid=GAUSS_GRID):
    return SampledSignal(grid, np.exp(-np.pi * grid.points**2) + 0j)


def test_kernel_values():
    j = sp.special("J")
    assert mp.kernel(j, 0.0, 0.0) == pytest.approx(-1j)
    m = sp.from_blocks(0, 2, -0.5, 3)
    assert mp.kernel(m, 0.0, 0.0) == pytest.approx(1 / cmath.sqrt(-2))
    m1 = example(1).mwd.M1  # [[0, 1], [-1, 2]]
    expected = (1 / cmath.sqrt(-1)) * cmath.exp(1j * np.pi * 2.0)
    assert mp.kernel(m1, 1.0, 0.0) == pytest.approx(expected, abs=1e-13)


def test_kernel_modulus():
    rng = np.random.default_rng(1)
    m = sp.random_symplectic(rng)
    k = mp.kernel(m, rng.normal(size=20), rng.normal(size=20))
    assert np.allclose(np.abs(k), 1 / np.sqrt(abs(m.det_b)))


def test_kernel_singular_b():
    with pytest.raises(mp.SingularB):
        mp.kernel(sp.special("I2N"), 0.0, 0.0)


def test_identity_transform_exact():
    f = generate("GaussLFM", UniformGrid.from_interval(-5, 5, 50))
    g = mp.mt(f, sp.special("I2N"))
    assert np.array_equal(g.values, f.values)


def test_fourier_of_gaussian():
    out = mp.mt(gaussian(), sp.special("J"))
    ref = np.exp(-np.pi * out.grid.points**2)
    res, c = aligned_residual(out.values, ref)
    assert res <= 1e-3
    assert abs(abs(c) - 1) < 1e-12


def test_fourier_matches_fft():
    f = gaussian()
    out = mp.mt(f, sp.special("J"), fourier_normalized=True)
    # shifted FFT with the grid-origin phase gives the continuous transform samples
    n, d = f.grid.count, f.grid.step
    spec = sfft.fftshift(sfft.fft(sfft.ifftshift(f.values))) * d
    res, _ = aligned_residual(out.values, spec)
    assert res <= 1e-3


def test_chirpfft_matches_direct():
    f = generate("GaussLFM", UniformGrid.from_interval(-5, 5, 50))
    for m in (example(1).mwd.M1, example(3).mwd.M, sp.special("J")):
        a = mp.mt(f, m, "chirpfft")
        b = mp.mt(f, m, "direct", out_grid=a.grid)
        assert rel_residual(b.values, a.values) <= 1e-6


def test_chirpfft_grid_mismatch():
    f = gaussian()
    with pytest.raises(mp.PlanMismatch):
        mp.mt(f, sp.special("J"), "chirpfft", out_grid=UniformGrid.symmetric(11, 0.1))


def test_parseval_example_matrix():
    f = generate("GaussLFM", UniformGrid.from_interval(-5, 5, 50))
    g = mp.mt(f, example(1).mwd.M1)
    ratio = np.sqrt(g.energy() / f.energy())
    assert ratio == pytest.approx(1.0, abs=1e-3)


def _bounded_pairs(count):
    # random pairs whose product also has a B block away from zero, so that every
    # kernel chirp is resolved by the quadrature grids below
    rng = np.random.default_rng(2024)
    out = []
    while len(out) < count:
        m1, m2 = (sp.exp_param(0.6 * rng.normal(size=3)) for _ in range(2))
        mats = (m1, m2, sp.compose(m1, m2))
        if all(abs(m.det_b) >= 0.5 and np.abs(m.entries).max() <= 1.6 for m in mats):
            out.append((m1, m2))
    return out


def test_inverse_and_cascade():
    f = gaussian()
    mid, out = UniformGrid.symmetric(1025, 1 / 32), UniformGrid.symmetric(257, 1 / 16)
    ref = np.exp(-np.pi * out.points**2)
    for m1, m2 in _bounded_pairs(6):
        inner = mp.mt(f, m2, "direct", out_grid=mid)
        back = mp.inverse_mt(inner, m2, "direct", out_grid=out)
        assert correlation(back.values, ref) >= 1 - 1e-3
        two = mp.mt(inner, m1, "direct", out_grid=out)
        one = mp.mt(f, sp.compose(m1, m2), "direct", out_grid=out)
        assert correlation(two.values, one.values) >= 1 - 1e-3


def test_inverse_is_exact_including_constant():
    f = gaussian()
    m = example(1).mwd.M1
    back = mp.inverse_mt(mp.mt(f, m), m, "direct", out_grid=f.grid)
    assert rel_residual(back.values, f.values) <= 1e-6


def test_partial_identity_and_separable():
    xg, yg = UniformGrid.symmetric(9, 0.5), UniformGrid.symmetric(64, 1 / 8)
    fx = np.exp(-xg.points**2)
    gy = np.exp(-np.pi * yg.points**2) * np.exp(1j * yg.points)
    h = np.outer(fx, gy)
    same = mp.partial_mt2(h, xg, yg, sp.special("I2N"))
    assert np.array_equal(same.values, h)
    m = example(1).mwd.M1
    out = mp.partial_mt2(h, xg, yg, m)
    ref = mp.mt(SampledSignal(yg, gy), m)
    assert np.abs(out.values - np.outer(fx, ref.values)).max() <= 1e-6


def test_partial_fourier_matches_fft():
    xg, yg = UniformGrid.symmetric(5, 1.0), UniformGrid.symmetric(256, 1 / 16)
    h = np.exp(-np.pi * (xg.points[:, None] ** 2 + yg.points[None, :] ** 2)) + 0j
    out = mp.partial_mt2(h, xg, yg, sp.special("J"))
    spec = sfft.fftshift(sfft.fft(sfft.ifftshift(h, axes=1), axis=1), axes=1) * yg.step
    res, c = aligned_residual(out.values, spec)
    assert res <= 1e-6


def test_two_dimensional_transform_against_points():
    g = UniformGrid.symmetric(32, 0.25)
    x1, x2 = np.meshgrid(g.points, g.points, indexing="ij")
    F = TFDistribution(g, g, np.exp(-np.pi * (x1**2 + x2**2)) + 0j)
    m = sp.special("J", 2)
    out = mp.mt(F, m)
    u1, u2 = out.mesh()
    res, _ = aligned_residual(out.values, np.exp(-np.pi * (u1**2 + u2**2)))
    assert res <= 1e-3


def test_dimension_checks():
    f = gaussian()
    with pytest.raises(mp.NonconformingGrid):
        mp.mt(f, sp.special("J", 2))
