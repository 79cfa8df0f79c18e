import numpy as np
import pytest

from mtfa import symplectic as sp
from mtfa.cohen import KernelSpec, kernel_field
from mtfa.gmconv import GMCMatrices, convolve_direct
from mtfa.signals import SampledSignal, UniformGrid, generate
from mtfa.tfd import TFDistribution, aligned_residual, rel_residual
from mtfa.wigner import (ConstraintViolated, DegenerateAnchor, IllConditionedQuotient, MWDConfig,
                         cmcd_reconstruct, mwd, tf_grids, wd_invert, wigner)

GRID = UniformGrid.symmetric(128, 1 / 16)


def gaussian(grid=GRID):
    return SampledSignal(grid, np.exp(-np.pi * grid.points**2) + 0j)


def test_default_grids():
    g = tf_grids(GRID)
    assert g.x.count == 256 and g.x.step == GRID.step / 2
    assert g.y.count % 2 == 1 and g.y.contains_zero
    assert g.u.count == g.y.count


def test_gaussian_wigner_closed_form():
    W = wigner(gaussian())
    x, u = W.mesh()
    ref = np.sqrt(2) * np.exp(-2 * np.pi * (x**2 + u**2))
    res, c = aligned_residual(W.values, ref)
    assert res <= 1e-2
    # the unitary normalization leaves no residual phase or scale
    assert rel_residual(W.values, ref) <= 1e-2


@pytest.mark.parametrize("kind", ["LFM", "GaussLFM", "CExp"])
def test_classical_is_real(kind):
    f = generate(kind, UniformGrid.from_interval(-5, 5, 12.8))
    W = wigner(f)
    assert np.abs(W.values.imag).max() <= 1e-6 * np.abs(W.values).max()


def test_tau_half_equals_classical():
    f = generate("GaussLFM", GRID)
    base = MWDConfig.classical()
    tau = MWDConfig(base.M, base.M1, base.M2, sp.special("TauWigner", tau=0.5))
    assert np.array_equal(mwd(f, tau).values, mwd(f, base).values)


def test_mwd_config_checks():
    with pytest.raises(ValueError):
        MWDConfig(sp.special("J", 2), sp.special("I2N"), sp.special("I2N"), sp.special("PI"))


def test_invert_gauss_lfm():
    f = generate("GaussLFM", UniformGrid.from_interval(-4, 4, 8))
    est = wd_invert(wigner(f), out_grid=f.grid)
    res, _ = aligned_residual(est.values, f.values)
    assert res <= 1e-2


def test_invert_zero_is_degenerate():
    W = wigner(gaussian())
    with pytest.raises(DegenerateAnchor):
        wd_invert(W.with_values(np.zeros_like(W.values)))


def test_invert_cexp_phase_slope():
    f = generate("CExp", UniformGrid.from_interval(-5, 5, 8))
    est = wd_invert(wigner(f), out_grid=f.grid)
    assert np.allclose(np.abs(est.values), 1.0, atol=1e-2)
    phase = np.unwrap(np.angle(est.values))
    slope = np.polyfit(f.grid.points, phase, 1)[0] / (2 * np.pi)
    assert slope == pytest.approx(0.5, rel=0.02)


def test_invert_anchor_choice():
    f = generate("GaussLFM", UniformGrid.from_interval(-4, 4, 8))
    W = wigner(f)
    a = wd_invert(W, "Origin", out_grid=f.grid)
    assert aligned_residual(a.values, f.values)[0] <= 1e-2
    with pytest.raises(ValueError):
        wd_invert(W, "Nowhere")


def _reconstruction_setup(m3):
    f = generate("GaussLFM", UniformGrid.symmetric(64, 1 / 8))
    base = MWDConfig.classical()
    cfg = MWDConfig(base.M, base.M1, base.M2, m3)
    W = mwd(f, cfg)
    Pi = kernel_field(KernelSpec("Delta"), W)
    gmc = GMCMatrices.classical()
    return f, cfg, gmc, convolve_direct(W, Pi, gmc), Pi


def test_reconstruction_round_trip():
    f, cfg, gmc, C, Pi = _reconstruction_setup(sp.from_blocks(0, 1, -1, 0.5))
    est = cmcd_reconstruct(C, Pi, cfg, gmc, f.grid)
    # M2 = I, so the recovered signal carries the factor conj(f(0))
    est = est.values / np.conj(f.values[f.grid.zero_index()])
    assert rel_residual(f.values, est) <= 5e-2


def test_reconstruction_errors():
    f, cfg, gmc, C, Pi = _reconstruction_setup(sp.from_blocks(0, 1, -1, 0.5))
    with pytest.raises(IllConditionedQuotient):
        cmcd_reconstruct(C, Pi.with_values(np.zeros_like(Pi.values)), cfg, gmc, f.grid)
    with pytest.raises(ConstraintViolated):
        cmcd_reconstruct(C, Pi, MWDConfig.classical(), gmc, f.grid)


def test_tfd_io(tmp_path):
    from mtfa import tfd

    W = wigner(generate("GaussLFM", UniformGrid.symmetric(16, 0.25)))
    tfd.write_csv(W, tmp_path / "w.csv")
    tfd.write_binary(W, tmp_path / "w.bin")
    for back in (tfd.read_csv(tmp_path / "w.csv"), tfd.read_binary(tmp_path / "w.bin")):
        assert back.same_grid(W)
        assert np.array_equal(back.values, W.values)
    assert (tmp_path / "w.bin").stat().st_size == 16 + 32 * W.values.size


def test_tfd_rejects_bad_shapes():
    g = UniformGrid.symmetric(4, 1.0)
    with pytest.raises(ValueError):
        TFDistribution(g, g, np.zeros((3, 4)))
    with pytest.raises(ValueError):
        TFDistribution(g, g, np.full((4, 4), np.nan))
