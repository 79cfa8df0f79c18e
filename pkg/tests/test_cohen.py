import numpy as np
import pytest

from mtfa import symplectic as sp
from mtfa.bench import example
from mtfa.cohen import (CMCDConfig, GridTooLarge, KernelSpec, Pi_to_phi, classical_cohen_oracle, classify, cmcd,
                        kernel_grids, phi_eval, phi_to_Pi)
from mtfa.gmconv import GMCMatrices
from mtfa.signals import SampledSignal, UniformGrid, generate
from mtfa.tfd import aligned_residual, rel_residual
from mtfa.wigner import MWDConfig, mwd, tf_grids, wigner

J4 = sp.special("J", 2)


def gauss(x):
    return np.exp(-np.pi * x**2) + 0j


def test_phi_on_v_axis():
    v = np.linspace(-3, 3, 13)
    for kind in ("Wigner", "ChoiWilliams", "BornJordan", "MargenauHill", "Page", "KirkwoodRihaczek"):
        assert np.allclose(phi_eval(KernelSpec(kind), v, 0.0), 1.0)


def test_phi_point_values():
    assert phi_eval(KernelSpec("KirkwoodRihaczek"), 1.0, 1.0) == pytest.approx(-1.0)
    assert phi_eval(KernelSpec("BornJordan"), 0.5, 1.0) == pytest.approx(2 / np.pi)
    assert phi_eval(KernelSpec("ChoiWilliams", {"sigma": 2.0}), 1.0, 2.0) == pytest.approx(np.exp(-2.0))


def test_kernel_spec_validation():
    with pytest.raises(ValueError):
        KernelSpec("Triangle")
    with pytest.raises(ValueError):
        KernelSpec("ChoiWilliams", {"sigma": -1.0})
    spec = KernelSpec("ZhaoAtlasMarks", {"kappa": 0.25})
    assert KernelSpec.from_json_obj(spec.to_json_obj()).params == {"kappa": 0.25}


def test_wigner_kernel_is_delta():
    xg, ug = UniformGrid.symmetric(33, 0.25), UniformGrid.symmetric(31, 0.125)
    Pi = phi_to_Pi(KernelSpec("Wigner"), xg, ug)
    expect = np.zeros((33, 31))
    expect[16, 15] = 1 / (xg.step * ug.step)
    assert np.abs(Pi.values - expect).max() <= 1e-10 * expect.max()
    D = phi_to_Pi(KernelSpec("Delta"), xg, ug)
    assert np.array_equal(D.values, expect.astype(complex))


def test_choi_williams_kernel_shape():
    xg, ug = UniformGrid.symmetric(65, 0.125), UniformGrid.symmetric(65, 0.125)
    Pi = phi_to_Pi(KernelSpec("ChoiWilliams", {"sigma": 1.0}), xg, ug)
    v = Pi.values
    assert np.abs(v.imag).max() <= 1e-10 * np.abs(v).max()
    assert np.allclose(v, v[::-1, ::-1], atol=1e-10 * np.abs(v).max())
    assert v[32, 32].real > 0
    assert (v.sum() * Pi.cell).real == pytest.approx(1.0, rel=1e-2)


def test_custom_phi_round_trip():
    xg, ug = UniformGrid.symmetric(17, 0.25), UniformGrid.symmetric(15, 0.5)
    rng = np.random.default_rng(0)
    phi = rng.normal(size=(17, 15)) + 1j * rng.normal(size=(17, 15))
    Pi = phi_to_Pi(KernelSpec("CustomPhi", {"values": phi}), xg, ug)
    assert rel_residual(phi, Pi_to_phi(Pi)) <= 1e-6


def test_delta_cmcd_is_mwd():
    f = generate("GaussLFM", UniformGrid.symmetric(64, 1 / 8))
    ex = example(2)
    for gmc in (GMCMatrices.classical(), GMCMatrices(ex.gmc.M4, J4, ex.gmc.M4)):
        cfg = CMCDConfig(ex.mwd, gmc, KernelSpec("Delta"))
        C = cmcd(f, cfg, fast=False)
        assert np.abs(C.values - mwd(f, ex.mwd).values).max() <= 1e-10


def test_wigner_kernel_gives_classical_wd():
    f = generate("GaussLFM", UniformGrid.symmetric(64, 1 / 8))
    grids = tf_grids(f.grid)
    C = cmcd(f, CMCDConfig.classical(KernelSpec("Wigner")), grids)
    W = mwd(f, MWDConfig.classical(), grids)
    assert rel_residual(W.values, C.values) <= 1e-10
    g = SampledSignal(UniformGrid.symmetric(128, 1 / 16), gauss(UniformGrid.symmetric(128, 1 / 16).points))
    Cg = cmcd(g, CMCDConfig.classical(KernelSpec("Wigner")), tf_grids(g.grid), fast=False)
    x, u = Cg.mesh()
    res, _ = aligned_residual(Cg.values, np.sqrt(2) * np.exp(-2 * np.pi * (x**2 + u**2)))
    assert res <= 1e-2


@pytest.mark.parametrize("kind", ["Wigner", "MargenauHill"])
def test_classical_matches_integral_oracle(kind):
    g = UniformGrid(-2.5, 5 / 32, 32)
    f = SampledSignal(g, gauss(g.points) * np.exp(0.5j * np.pi * g.points**2))
    grids = tf_grids(g, 65)
    spec = KernelSpec(kind)
    C = cmcd(f, CMCDConfig.classical(spec), grids)
    O = classical_cohen_oracle(lambda t: gauss(t) * np.exp(0.5j * np.pi * t**2), spec, grids.x, grids.u)
    assert aligned_residual(O.values, C.values)[0] <= 5e-2


def test_margenau_hill_ridge_on_cexp():
    f = generate("CExp", UniformGrid.from_interval(-5, 5, 6.4))
    grids = tf_grids(f.grid)
    C = cmcd(f, CMCDConfig.classical(KernelSpec("MargenauHill")), grids)
    u = grids.u.points
    nearest = u[np.argmin(np.abs(u - 0.5))]
    inner = slice(grids.x.count // 4, 3 * grids.x.count // 4)
    peaks = u[np.argmax(np.abs(C.values[inner]), axis=1)]
    assert np.all(peaks == nearest)


def test_zero_signal_gives_zero_field():
    f = SampledSignal(UniformGrid.symmetric(32, 0.25), np.zeros(32, complex))
    C = cmcd(f, CMCDConfig(example(1).mwd, example(1).gmc, KernelSpec("BornJordan")))
    assert not np.any(C.values)


def test_linear_in_kernel():
    f = generate("GaussLFM", UniformGrid.symmetric(32, 0.25))
    ex = example(1)
    W = mwd(f, ex.mwd)
    kg = kernel_grids(W)
    P1 = phi_to_Pi(KernelSpec("ChoiWilliams"), *kg)
    P2 = phi_to_Pi(KernelSpec("BornJordan"), *kg)
    a, b = 0.7 + 0.2j, -1.5
    both = cmcd(f, CMCDConfig(ex.mwd, ex.gmc, P1.with_values(a * P1.values + b * P2.values)))
    sep = a * cmcd(f, CMCDConfig(ex.mwd, ex.gmc, P1)).values + b * cmcd(f, CMCDConfig(ex.mwd, ex.gmc, P2)).values
    assert rel_residual(sep, both.values) <= 1e-12


def test_fast_and_general_paths_agree():
    f = generate("GaussLFM", UniformGrid.symmetric(32, 0.25))
    ex = example(2)
    for cfg in (CMCDConfig.classical(KernelSpec("MargenauHill")),
                CMCDConfig(ex.mwd, GMCMatrices.classical(), KernelSpec("ChoiWilliams"))):
        assert rel_residual(cmcd(f, cfg, fast=False).values, cmcd(f, cfg).values) <= 1e-10


def test_classify_labels():
    ex = example(1)
    m4 = ex.gmc.M4
    assert classify(CMCDConfig.classical(KernelSpec("Wigner"))) == "cohen"
    assert classify(CMCDConfig.classical(KernelSpec("Delta"))) == "mwd"
    assert classify(CMCDConfig(ex.mwd, GMCMatrices.classical(), KernelSpec("BornJordan"))) == "mwd-cd"
    assert classify(CMCDConfig(MWDConfig.classical(), ex.gmc, KernelSpec("BornJordan"))) == "gmc-cd"
    assert classify(CMCDConfig(ex.mwd, GMCMatrices(m4, J4, m4), KernelSpec("Page"))) == "I-type"
    assert classify(CMCDConfig(ex.mwd, ex.gmc, KernelSpec("Page"))) == "II-type"
    mixed = GMCMatrices(m4, example(2).gmc.M4, example(3).gmc.M4)
    assert classify(CMCDConfig(ex.mwd, mixed, KernelSpec("Page"))) == "cmcd"


def test_config_from_json():
    obj = {"mwd": {"M1": {"n": 1, "rows": [[0, 1], [-1, 2]]}},
           "gmc": {"tied": {"n": 2, "rows": [[-5, 0, 1, 0], [0, 5, 0, 1], [0, 0, "-1/5", 0], [0, 0, 0, "1/5"]]}},
           "kernel": {"kind": "ChoiWilliams", "params": {"sigma": 0.5}}}
    cfg = CMCDConfig.from_json_obj(obj)
    assert cfg.mwd.M1 == example(1).mwd.M1 and cfg.mwd.M2 == sp.special("I2N")
    assert cfg.gmc == example(1).gmc
    assert cfg.kernel.params["sigma"] == 0.5
    with pytest.raises(ValueError):
        CMCDConfig.from_json_obj({"mwd": {}})


def test_oracle_size_cap():
    g = UniformGrid.symmetric(128, 0.1)
    with pytest.raises(GridTooLarge):
        classical_cohen_oracle(gauss, KernelSpec("Wigner"), g, g)
