"""Least-squares adaptive filtering in the metaplectic Wigner domain.

The filter H minimises E|W_target - (W_obs o H)|^2 where o is the generalized
metaplectic convolution.  Writing a = W_obs exp(pi i z F4 z^T) and
b = W_target exp(pi i z F6 z^T), the chirped filter h = H exp(pi i z F5 z^T)
solves the linear deconvolution b = a * h, which is done by regularized
spectral division on a zero-padded lattice so that the linear (not circular)
convolution is inverted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from . import metaplectic as mp
from .gmconv import GMCMatrices, chirp, convolve_direct
from .signals import GridMismatch, SampledSignal, UniformGrid, align_phase, metrics
from .tfd import TFDistribution
from .wigner import MWDConfig, TFGrids, mwd, tf_grids, wd_invert, wigner

DEFAULT_EPS = 1e-3
WH_GRID_CAP = 24


class AllZeroObservation(ValueError):
    pass


class GridTooLarge(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FilterDesign:
    """H on a symmetric lag grid, plus its mu(M5) spectrum.

    ``transfer`` holds mu(M5) H at u = xi B5^T, indexed by xi on the grids
    ``transfer.xgrid`` x ``transfer.ugrid``.
    """

    H: TFDistribution
    transfer: TFDistribution
    eps: float
    gmc: GMCMatrices


def _regularized_ratio(x: np.ndarray, y: np.ndarray, eps: float) -> np.ndarray:
    den = np.abs(y) ** 2
    top = den.max()
    if eps == 0.0:
        return x / y
    return x * np.conj(y) / (den + eps * top)


def lag_grids(grids, factor: int = 2) -> tuple[UniformGrid, UniformGrid]:
    """Symmetric lag grids wide enough for an exact linear deconvolution."""
    return tuple(UniformGrid.symmetric(sfft.next_fast_len(factor * g.count), g.step) for g in grids)


def _xi_points(g: UniformGrid) -> np.ndarray:
    n = g.count
    return (np.arange(n) - n // 2) / (n * g.step)


def _spectra(W_target: TFDistribution, W_obs: TFDistribution, gmc: GMCMatrices, eps: float):
    W_target.require_same_grid(W_obs)
    if not np.any(W_obs.values):
        raise AllZeroObservation("observation distribution is identically zero")
    lags = lag_grids(W_obs.grids)
    shape = (lags[0].count, lags[1].count)
    a = W_obs.values * chirp(gmc.F4, W_obs.grids)
    b = W_target.values * chirp(gmc.F6, W_target.grids)
    fa = sfft.fft2(a, s=shape)
    fb = sfft.fft2(b, s=shape)
    return _regularized_ratio(fb, fa, eps), fa, lags


def design_lsaf(W_target: TFDistribution, W_obs: TFDistribution, gmc: GMCMatrices, eps: float = DEFAULT_EPS) -> FilterDesign:
    ratio, _, lags = _spectra(W_target, W_obs, gmc, eps)
    shape = ratio.shape
    h = sfft.fftshift(sfft.ifft2(ratio)) / W_obs.cell
    H = TFDistribution(lags[0], lags[1], h * chirp(gmc.F5, lags, -1.0))
    # mu(M5) H on the lattice u = xi B5^T: the chirps and the DFT collapse to the ratio
    xig = (UniformGrid.symmetric(shape[0], 1.0 / (shape[0] * lags[0].step)),
           UniformGrid.symmetric(shape[1], 1.0 / (shape[1] * lags[1].step)))
    xi = np.stack(np.meshgrid(xig[0].points, xig[1].points, indexing="ij"), -1)
    u = xi @ gmc.M5.B.T
    b5inv = np.linalg.inv(gmc.M5.B)
    # DTFT of h at xi: the lag origin sits at index P//2 after fftshift, so the
    # unshifted ratio is already referenced to lag 0
    spec = sfft.fftshift(ratio)
    transfer = mp.constant(gmc.M5) * np.exp(1j * np.pi * mp._quad(u, gmc.M5.D @ b5inv)) * spec
    return FilterDesign(H, TFDistribution(xig[0], xig[1], transfer), eps, gmc)


def transfer_closed_form(W_target: TFDistribution, W_obs: TFDistribution, gmc: GMCMatrices, w_points,
                         eps: float = 0.0) -> np.ndarray:
    """mu(M5) H_opt at the points ``w`` from the closed-form quotient of metaplectic spectra.

    The spectra are evaluated by direct quadrature at the mapped points, so this
    path shares no code with ``design_lsaf`` beyond the kernel definition.
    """
    w = np.asarray(w_points, dtype=float).reshape(-1, 2)
    m4, m5, m6 = gmc.M4, gmc.M5, gmc.M6
    b5it = np.linalg.inv(m5.B).T
    xi = w @ b5it
    num = mp.eval_points_2d(W_target.values, W_target.grids, m6, xi @ m6.B.T)
    den = mp.eval_points_2d(W_obs.values, W_obs.grids, m4, xi @ m4.B.T)
    d4, d5, d6 = (np.linalg.det(m.B) for m in (m4, m5, m6))
    pref = np.sqrt(complex(-d6)) / (np.sqrt(complex(-d4)) * np.sqrt(complex(-d5)))
    q = b5it @ m4.B.T @ m4.D @ np.linalg.inv(m5.B) + m5.D @ np.linalg.inv(m5.B) \
        - b5it @ m6.B.T @ m6.D @ np.linalg.inv(m5.B)
    return pref * np.exp(1j * np.pi * mp._quad(w, q)) * _regularized_ratio(num, den, eps)


def apply_filter(W_obs: TFDistribution, d: FilterDesign) -> TFDistribution:
    return convolve_direct(W_obs, d.H, d.gmc)


def filtered(W_target: TFDistribution, W_obs: TFDistribution, gmc: GMCMatrices,
             eps: float = DEFAULT_EPS) -> TFDistribution:
    """apply_filter(W_obs, design_lsaf(...)) without forming H on the lag grid.

    The padded lattice makes the circular product equal to the linear
    convolution, so this matches the two-step route to rounding error.
    """
    ratio, fa, _ = _spectra(W_target, W_obs, gmc, eps)
    n0, n1 = W_obs.values.shape
    conv = sfft.ifft2(fa * ratio)[:n0, :n1]
    return W_obs.with_values(conv * chirp(gmc.F6, W_obs.grids, -1.0))


def wigner_mse(W_hat: TFDistribution, W_ref: TFDistribution) -> float:
    W_hat.require_same_grid(W_ref)
    return float(np.mean(np.abs(W_ref.values - W_hat.values) ** 2))


# -- numerical Wiener-Hopf solve -----------------------------------------------

@dataclass(frozen=True, eq=False)
class WienerHopfResult:
    H: TFDistribution
    H_tilde: TFDistribution
    residual: float
    equation_residual: float
    rank_deficient: bool


def correlations(targets_tilde, obs_tilde) -> tuple[np.ndarray, np.ndarray]:
    """Ensemble estimates R_cross(z, z') = E b(z) conj a(z') and R_auto(k, k') = E a(k) conj a(k')."""
    b = np.stack([np.asarray(t).ravel() for t in targets_tilde])
    a = np.stack([np.asarray(t).ravel() for t in obs_tilde])
    shape = np.asarray(obs_tilde[0]).shape
    r_cross = (b.T @ a.conj()) / len(a)
    r_auto = (a.T @ a.conj()) / len(a)
    return r_cross.reshape(shape + shape), r_auto.reshape(shape + shape)


def _assemble(r_cross, r_auto, radius, cell):
    n1, n2 = r_auto.shape[:2]
    r1, r2 = radius
    l1 = np.arange(-r1, r1 + 1)
    l2 = np.arange(-r2, r2 + 1)
    nl = l1.size * l2.size
    ra = r_auto.reshape(n1 * n2, n1 * n2)
    rc = r_cross.reshape(n1 * n2, n1 * n2)
    z1, z2 = np.meshgrid(np.arange(n1), np.arange(n2), indexing="ij")
    z1 = z1.ravel()
    z2 = z2.ravel()
    gram = np.zeros((nl, nl), dtype=complex)
    rhs = np.zeros(nl, dtype=complex)
    # k' = z - l' for every z in the grid and k' in the grid gives l' = z - k'
    k1, k2 = np.meshgrid(np.arange(n1), np.arange(n2), indexing="ij")
    k1 = k1.ravel()
    k2 = k2.ravel()
    for j, (a1, a2) in enumerate((p, q) for p in l1 for q in l2):
        # rows k = z - l (valid z only)
        s1, s2 = z1 - a1, z2 - a2
        ok = (s1 >= 0) & (s1 < n1) & (s2 >= 0) & (s2 < n2)
        zsel = np.flatnonzero(ok)
        krow = s1[ok] * n2 + s2[ok]
        blk = ra[krow, :]  # (valid z, k')
        d1 = z1[zsel][:, None] - k1[None, :]
        d2 = z2[zsel][:, None] - k2[None, :]
        inside = (np.abs(d1) <= r1) & (np.abs(d2) <= r2)
        idx = ((d1 + r1) * l2.size + (d2 + r2))[inside]
        w = blk[inside]
        col = np.bincount(idx, weights=w.real, minlength=nl) + 1j * np.bincount(idx, weights=w.imag, minlength=nl)
        gram[:, j] = col * cell * cell
    d1 = z1[:, None] - k1[None, :]
    d2 = z2[:, None] - k2[None, :]
    inside = (np.abs(d1) <= r1) & (np.abs(d2) <= r2)
    idx = ((d1 + r1) * l2.size + (d2 + r2))[inside]
    w = rc[inside]
    rhs = (np.bincount(idx, weights=w.real, minlength=nl) + 1j * np.bincount(idx, weights=w.imag, minlength=nl)) * cell
    return gram, rhs, (l1, l2)


def wiener_hopf_numeric(r_cross: np.ndarray, r_auto: np.ndarray, grids, gmc: GMCMatrices,
                        radius: tuple[int, int] | None = None) -> WienerHopfResult:
    """Dense least-squares solution of the discretized Wiener-Hopf equation.

    ``r_cross`` and ``r_auto`` are 4-D arrays over (z, z') of the chirped
    fields.  The unknown chirped filter lives on lags |l_i| <= radius_i.
    """
    n1, n2 = r_auto.shape[:2]
    if max(n1, n2) > WH_GRID_CAP:
        raise GridTooLarge(f"Wiener-Hopf grid capped at {WH_GRID_CAP} x {WH_GRID_CAP}")
    if r_cross.shape != r_auto.shape:
        raise GridMismatch("correlation operators disagree in shape")
    radius = radius or (n1 - 1, n2 - 1)
    cell = grids[0].step * grids[1].step
    gram, rhs, (l1, l2) = _assemble(r_cross, r_auto, radius, cell)
    sol, _, rank, _ = np.linalg.lstsq(gram, rhs, rcond=1e-12)
    deficient = rank < gram.shape[0]
    res = float(np.linalg.norm(gram @ sol - rhs) / max(np.linalg.norm(rhs), 1e-300))
    lg = (UniformGrid(-radius[0] * grids[0].step, grids[0].step, l1.size),
          UniformGrid(-radius[1] * grids[1].step, grids[1].step, l2.size))
    h_tilde = sol.reshape(l1.size, l2.size)
    # full equation residual: R_cross(z, z') - sum_k R_auto(k, z') h(z - k) cell
    est = np.zeros((n1, n2, n1, n2), dtype=complex)
    for i, a1 in enumerate(l1):
        for j, a2 in enumerate(l2):
            if h_tilde[i, j] == 0:
                continue
            z1s = slice(max(a1, 0), min(n1 + a1, n1))
            k1s = slice(max(-a1, 0), min(n1 - a1, n1))
            z2s = slice(max(a2, 0), min(n2 + a2, n2))
            k2s = slice(max(-a2, 0), min(n2 - a2, n2))
            est[z1s, z2s] += r_auto[k1s, k2s] * h_tilde[i, j] * cell
    eq_res = float(np.linalg.norm(r_cross - est) / max(np.linalg.norm(r_cross), 1e-300))
    Ht = TFDistribution(lg[0], lg[1], h_tilde)
    H = Ht.with_values(h_tilde * chirp(gmc.F5, lg, -1.0))
    return WienerHopfResult(H, Ht, res, eq_res, bool(deficient))


def wiener_hopf_from_ensemble(W_targets, W_obs_list, gmc: GMCMatrices, radius=None) -> WienerHopfResult:
    grids = W_obs_list[0].grids
    b = [w.values * chirp(gmc.F6, grids) for w in W_targets]
    a = [w.values * chirp(gmc.F4, grids) for w in W_obs_list]
    rc, ra = correlations(b, a)
    return wiener_hopf_numeric(rc, ra, grids, gmc, radius)


def orthogonality_residual(W_targets, W_obs_list, H: TFDistribution, gmc: GMCMatrices) -> float:
    """max over lags of |E (b - b_hat)(z) conj a(z - l)| relative to the product of norms."""
    grids = W_obs_list[0].grids
    worst = 0.0
    acc = None
    norm_e = norm_a = 0.0
    for Wt, Wo in zip(W_targets, W_obs_list):
        est = convolve_direct(Wo, H, gmc)
        e = (Wt.values - est.values) * chirp(gmc.F6, grids)
        a = Wo.values * chirp(gmc.F4, grids)
        shape = [sfft.next_fast_len(2 * n) for n in e.shape]
        c = sfft.ifft2(sfft.fft2(e, s=shape) * np.conj(sfft.fft2(a, s=shape)))
        acc = c if acc is None else acc + c
        norm_e += np.linalg.norm(e) ** 2
        norm_a += np.linalg.norm(a) ** 2
    worst = float(np.max(np.abs(acc)) / max(np.sqrt(norm_e * norm_a), 1e-300))
    return worst


# -- denoising pipeline --------------------------------------------------------

@dataclass(frozen=True)
class PipelineConfig:
    mwd: MWDConfig
    gmc: GMCMatrices

    @classmethod
    def classical(cls) -> "PipelineConfig":
        return cls(MWDConfig.classical(), GMCMatrices.classical())


@dataclass(frozen=True)
class Diagnostics:
    wigner_mse: float
    signal_mse: float
    psnr_db: float
    epsilon: float
    trials: int = 1

    def to_json_obj(self) -> dict:
        def clean(v):
            return v if np.isfinite(v) else ("inf" if v > 0 else "-inf")
        return {"wigner_mse": clean(self.wigner_mse), "signal_mse": clean(self.signal_mse),
                "psnr_db": clean(self.psnr_db), "epsilon": self.epsilon, "trials": self.trials}

    def dumps(self) -> str:
        return json.dumps(self.to_json_obj(), indent=2)


def denoise(g: SampledSignal, reference: SampledSignal, cfg: PipelineConfig, eps: float = DEFAULT_EPS,
            grids: TFGrids | None = None, W_target: TFDistribution | None = None,
            anchor: str = "MaxEnergy") -> tuple[SampledSignal, Diagnostics]:
    """Oracle LSAF-CMCD denoising of ``g`` with the clean ``reference`` as design target.

    The estimate is phase-aligned to the reference before it is returned,
    since Wigner inversion only recovers a signal up to a global phase.
    """
    if not g.grid.same_as(reference.grid):
        raise GridMismatch("observation and reference grids differ")
    grids = grids or tf_grids(g.grid)
    if W_target is None:
        W_target = wigner(reference, grids)
    W_obs = mwd(g, cfg.mwd, grids, grids.u)
    W_hat = filtered(W_target, W_obs, cfg.gmc, eps)
    est = wd_invert(W_hat, anchor, out_grid=g.grid)
    est = align_phase(est, reference)
    m = metrics(est, reference)
    return est, Diagnostics(wigner_mse(W_hat, W_target), m.mse, m.psnr, eps)
