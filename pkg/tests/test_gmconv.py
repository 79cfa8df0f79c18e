import cmath

import numpy as np
import pytest
from scipy.signal import fftconvolve

from mtfa import symplectic as sp
from mtfa.bench import example
from mtfa.gmconv import (GMCMatrices, LinearConvolver, chirp, convolve_direct, convolve_spectral, deconvolve,
                         epsilon_factor, iv_partner, linear_convolve)
from mtfa.signals import GridMismatch, UniformGrid
from mtfa.tfd import TFDistribution, rel_residual

J4 = sp.special("J", 2)


def gauss_field(grid, centre=(0.0, 0.0), width=1.0, chirp=0.0):
    x, u = np.meshgrid(grid.points, grid.points, indexing="ij")
    r2 = (x - centre[0]) ** 2 + (u - centre[1]) ** 2
    return TFDistribution(grid, grid, np.exp(-np.pi * r2 / width**2 + 1j * chirp * x * u))


def delta_field(grid):
    v = np.zeros((grid.count, grid.count), complex)
    i = grid.zero_index()
    v[i, i] = 1.0 / grid.step**2
    return TFDistribution(grid, grid, v)


def test_epsilon_values():
    assert epsilon_factor(GMCMatrices.classical(), [0.0, 0.0]) == pytest.approx(1j)
    m = GMCMatrices(example(1).gmc.M4, example(2).gmc.M4, example(3).gmc.M4)
    b4, b5, b6 = (np.linalg.det(x.B) for x in (m.M4, m.M5, m.M6))
    assert epsilon_factor(m, [0.0, 0.0]) == pytest.approx(cmath.sqrt(-b4 * b5 / b6))


def test_epsilon_example_one_scalar():
    # M4 = M5 = M6 with A = diag(-5, 5), B = I, D = diag(-1/5, 1/5):
    # amplitude sqrt(-1) = i and exponent D - D - D = -D, so u (-D) u^T = 1/5 - 1/5 = 0 at u = (1, 1)
    m = example(1).gmc
    assert epsilon_factor(m, [1.0, 1.0]) == pytest.approx(1j, abs=1e-13)
    # at u = (1, 0) the exponent is pi i / 5
    assert epsilon_factor(m, [1.0, 0.0]) == pytest.approx(1j * cmath.exp(1j * np.pi / 5), abs=1e-13)


def test_classical_is_plain_convolution():
    g = UniformGrid.symmetric(33, 0.25)
    F, G = gauss_field(g, (0.5, -0.3), chirp=0.7), gauss_field(g, (-0.2, 0.1), 0.8)
    out = convolve_direct(F, G, GMCMatrices.classical())
    full = fftconvolve(F.values, G.values) * g.step**2
    o = g.zero_index()
    ref = full[o:o + g.count, o:o + g.count]
    assert rel_residual(ref, out.values) <= 1e-8


def test_delta_leaves_field_unchanged():
    g = UniformGrid.symmetric(33, 0.25)
    F = gauss_field(g, chirp=0.4)
    for m4 in (J4, example(1).gmc.M4, example(2).gmc.M4):
        m = GMCMatrices(m4, example(3).gmc.M4, m4)
        out = convolve_direct(F, delta_field(g), m)
        assert np.abs(out.values - F.values).max() <= 1e-10


def test_brute_force_example_one():
    g = UniformGrid(-2.0, 0.125, 32)
    F, G = gauss_field(g, (0.2, 0.1), 0.6), gauss_field(g, (-0.1, 0.0), 0.5)
    m = example(1).gmc
    out = convolve_direct(F, G, m).values
    pts = g.points
    q4, q5, q6 = m.F4, m.F5, m.F6

    def cz(q, z1, z2):
        return np.exp(1j * np.pi * (q[0, 0] * z1 * z1 + (q[0, 1] + q[1, 0]) * z1 * z2 + q[1, 1] * z2 * z2))

    ref = np.zeros_like(out)
    n, o = g.count, g.zero_index()
    for i in range(n):
        for k in range(n):
            acc = 0j
            for a in range(n):
                for b in range(n):
                    ia, kb = i - a + o, k - b + o
                    if 0 <= ia < n and 0 <= kb < n:
                        acc += (F.values[a, b] * cz(q4, pts[a], pts[b])
                                * G.values[ia, kb] * cz(q5, pts[ia], pts[kb]))
            ref[i, k] = acc * g.step**2 * np.conj(cz(q6, pts[i], pts[k]))
    assert rel_residual(ref, out) <= 1e-6


def test_bilinear():
    g = UniformGrid.symmetric(33, 0.25)
    F1, F2, G = gauss_field(g, (0.3, 0)), gauss_field(g, (0, 0.4), chirp=1.0), gauss_field(g, width=0.7)
    m = example(2).gmc
    a, b = 0.3 - 1.2j, 2.0
    lhs = convolve_direct(F1.with_values(a * F1.values + b * F2.values), G, m).values
    rhs = a * convolve_direct(F1, G, m).values + b * convolve_direct(F2, G, m).values
    assert rel_residual(lhs, rhs) <= 1e-12
    lhs = convolve_spectral(F1.with_values(a * F1.values + b * F2.values), G, m).values
    rhs = a * convolve_spectral(F1, G, m).values + b * convolve_spectral(F2, G, m).values
    assert rel_residual(lhs, rhs) <= 1e-12


@pytest.mark.parametrize("name", ["conventional", "delta", "example2"])
def test_spectral_matches_direct(name):
    g = UniformGrid.symmetric(65, 0.125)
    F = gauss_field(g, (0.3, -0.2), 0.8)
    G = delta_field(g) if name == "delta" else gauss_field(g, (-0.1, 0.2), 0.7)
    m = {"conventional": GMCMatrices.classical(), "delta": GMCMatrices(example(1).gmc.M4, J4, example(1).gmc.M4),
         "example2": example(2).gmc}[name]
    direct = convolve_direct(F, G, m).values
    spectral = convolve_spectral(F, G, m).values
    assert rel_residual(direct, spectral) <= 1e-2
    if name == "delta":
        assert rel_residual(F.values, spectral) <= 1e-2


def test_families():
    m1 = example(1).gmc.M4
    assert GMCMatrices.classical().family() == "conventional"
    assert GMCMatrices.tied(m1).family() == "II-type"
    assert GMCMatrices(m1, J4, m1).family() == "I-type"
    assert GMCMatrices(m1, m1, iv_partner(m1)).family() == "IV-type"


def test_i_type_kernel_chirp_vanishes():
    # with M5 = J the kernel enters without any chirp
    g = UniformGrid.symmetric(33, 0.25)
    F, G = gauss_field(g, (0.2, 0.1)), gauss_field(g, width=0.6, chirp=0.5)
    m4 = example(2).gmc.M4
    out = convolve_direct(F, G, GMCMatrices(m4, J4, m4)).values
    f4 = np.linalg.solve(m4.B, m4.A)
    hard = linear_convolve(F.values * chirp(f4, F.grids), F.grids, G.values, G.grids)
    hard = hard * chirp(f4, F.grids, -1.0)
    assert rel_residual(hard, out) <= 1e-12


def test_deconvolve_inverts_direct():
    g = UniformGrid.symmetric(33, 0.25)
    F, K = gauss_field(g, (0.2, 0.1), chirp=0.3), gauss_field(g, width=0.5)
    m = example(2).gmc
    C = convolve_direct(F, K, m)
    back = deconvolve(C, K, m, eps=1e-12)
    assert rel_residual(F.values, back.values) <= 1e-6


def test_grid_checks():
    a = gauss_field(UniformGrid.symmetric(9, 0.25))
    b = gauss_field(UniformGrid.symmetric(9, 0.5))
    with pytest.raises(GridMismatch):
        convolve_direct(a, b, GMCMatrices.classical())
    with pytest.raises(GridMismatch):
        convolve_spectral(a, b, GMCMatrices.classical())
    with pytest.raises(GridMismatch):
        LinearConvolver(a.grids, b.values, b.grids)(np.zeros((3, 3)))


def test_singular_b_rejected():
    with pytest.raises(ValueError):
        GMCMatrices(sp.special("I2N", 2), J4, J4)
