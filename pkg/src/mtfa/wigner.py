"""Metaplectic Wigner distributions, classical Wigner inversion and CMCD reconstruction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from . import metaplectic as mp
from .signals import SampledSignal, UniformGrid
from .symplectic import SymplecticMatrix, inverse, special, validate
from .tfd import TFDistribution

# cap on the number of distinct points at which mu(M1) f and mu(M2) f are evaluated
MAX_FACTOR_POINTS = 4_000_000


class GridTooCoarse(ValueError):
    pass


class DegenerateAnchor(ValueError):
    pass


class ConstraintViolated(ValueError):
    pass


class IllConditionedQuotient(ValueError):
    pass


@dataclass(frozen=True)
class MWDConfig:
    M: SymplecticMatrix
    M1: SymplecticMatrix
    M2: SymplecticMatrix
    M3: SymplecticMatrix

    def __post_init__(self):
        for name in ("M", "M1", "M2", "M3"):
            if getattr(self, name).n != 1:
                raise ValueError(f"{name} must be 2x2")

    @classmethod
    def classical(cls) -> "MWDConfig":
        eye = special("I2N")
        return cls(special("J"), eye, eye, special("PI"))

    def is_classical(self) -> bool:
        return self == MWDConfig.classical()


@dataclass(frozen=True)
class TFGrids:
    """Time grid x (half-sample spacing), lag grid y and frequency grid u."""

    x: UniformGrid
    y: UniformGrid
    u: UniformGrid


def tf_grids(signal_grid: UniformGrid, n_lag: int | None = None) -> TFGrids:
    """Default grids: x at half the sample spacing, odd symmetric lags, conjugate u."""
    n = signal_grid.count
    d = signal_grid.step
    if n_lag is None:
        n_lag = n if n % 2 else n + 1
    if n_lag % 2 == 0:
        raise ValueError("n_lag must be odd so that the lag grid is symmetric")
    x = UniformGrid(signal_grid.start, d / 2, 2 * n)
    y = UniformGrid.symmetric(n_lag, d)
    return TFGrids(x, y, y.conjugate())


def _swap_product(m3: SymplecticMatrix) -> np.ndarray:
    # M3 @ [[0,1],[1,0]] swaps the columns of M3
    return m3.entries[:, ::-1]


def _factor_at(f: SampledSignal, m: SymplecticMatrix, pts: np.ndarray) -> np.ndarray:
    """mu(m) f evaluated at every entry of ``pts`` (distinct values computed once)."""
    key = np.round(pts.ravel(), 11)
    uniq, inv = np.unique(key, return_inverse=True)
    if uniq.size > MAX_FACTOR_POINTS:
        raise GridTooCoarse(f"{uniq.size} distinct evaluation points exceed the cap {MAX_FACTOR_POINTS}")
    vals = mp.eval_points_1d(f.values, f.grid, m, uniq)
    return vals[inv].reshape(pts.shape)


def coordinate_field(f: SampledSignal, cfg: MWDConfig, xgrid: UniformGrid, ygrid: UniformGrid) -> np.ndarray:
    """sqrt|det(M3 I)| * (mu(M1) f)(s) * conj((mu(M2) f)(t)),  (s, t) = (x, y) M3 I."""
    p = _swap_product(cfg.M3)
    x, y = np.meshgrid(xgrid.points, ygrid.points, indexing="ij")
    s = x * p[0, 0] + y * p[1, 0]
    t = x * p[0, 1] + y * p[1, 1]
    if cfg.M1 == cfg.M2:
        both = _factor_at(f, cfg.M1, np.stack([s, t]))
        phi1, phi2 = both[0], both[1]
    else:
        phi1 = _factor_at(f, cfg.M1, s)
        phi2 = _factor_at(f, cfg.M2, t)
    return np.sqrt(abs(np.linalg.det(p))) * phi1 * np.conj(phi2)


def mwd(f: SampledSignal, cfg: MWDConfig, grids: TFGrids | None = None, ugrid: UniformGrid | None = None,
        method: str = "auto", fourier_normalized: bool = False) -> TFDistribution:
    """Metaplectic Wigner distribution of ``f``.

    With ``ugrid=None`` the output frequency grid is the lag grid's conjugate
    scaled by the B block of ``cfg.M``.
    """
    grids = grids or tf_grids(f.grid)
    t = coordinate_field(f, cfg, grids.x, grids.y)
    return mp.partial_mt2(t, grids.x, grids.y, cfg.M, method, ugrid, fourier_normalized)


def wigner(f: SampledSignal, grids: TFGrids | None = None) -> TFDistribution:
    """Classical Wigner distribution with the unitary Fourier transform (real valued)."""
    grids = grids or tf_grids(f.grid)
    return mwd(f, MWDConfig.classical(), grids, grids.u, fourier_normalized=True)


def _lag_step(W: TFDistribution) -> float:
    return 1.0 / (W.ugrid.count * W.ugrid.step)


def wd_invert(W: TFDistribution, anchor: str = "MaxEnergy", out_grid: UniformGrid | None = None,
              threshold: float = 1e-12) -> SampledSignal:
    """Recover a signal (up to global phase) from its classical Wigner distribution."""
    d = _lag_step(W)
    ratio = d / W.xgrid.step
    if abs(ratio - round(ratio)) > 1e-9 or round(ratio) % 2:
        raise ValueError("time grid must refine the sample grid by an even factor")
    ratio = int(round(ratio))
    if out_grid is None:
        count = (W.xgrid.count - 1) // ratio + 1
        out_grid = UniformGrid(W.xgrid.start, d, count)
    u = W.ugrid.points
    du = W.ugrid.step
    n = out_grid.count
    tix = np.rint((out_grid.points - W.xgrid.start) / W.xgrid.step).astype(int)
    diag = (W.values[tix, :].sum(axis=1) * du)
    scale = np.max(np.abs(W.values)) if W.values.size else 0.0
    if anchor == "MaxEnergy":
        mag = np.abs(diag)
        best = mag.max()
        cand = np.flatnonzero(mag >= best * (1 - 1e-9))
        centre = (n - 1) / 2
        a = int(cand[np.argmin(np.abs(cand - centre))])
    elif anchor == "Origin":
        a = int(np.argmin(np.abs(out_grid.points)))
    else:
        raise ValueError(f"unknown anchor {anchor!r}")
    ra = diag[a]
    if not np.isfinite(ra) or abs(ra) <= threshold * max(scale * du, 1e-300) or scale == 0.0:
        raise DegenerateAnchor("anchor autocorrelation vanishes")
    half = (W.ugrid.count - 1) // 2
    step2 = ratio // 2

    def column(t_idx, t_prime):
        # r(t, t') for every t in t_idx, read from the row at (t + t') / 2
        m = t_idx - t_prime
        xi = tix[t_prime] + m * step2
        ok = (np.abs(m) <= half) & (xi >= 0) & (xi < W.xgrid.count)
        r = np.zeros(t_idx.size, dtype=complex)
        rows = W.values[xi[ok], :]
        r[ok] = (rows * np.exp(2j * np.pi * u[None, :] * (m[ok] * d)[:, None])).sum(axis=1) * du
        return r, ok

    out = np.zeros(n, dtype=complex)
    idx = np.arange(n)
    r, ok = column(idx, a)
    out[ok] = r[ok] / np.sqrt(abs(ra)) * np.exp(-1j * np.angle(ra))
    # samples out of the anchor's lag reach are chained from already recovered
    # samples: f(t) = r(t, t') / conj(f(t')) with the strongest t' in reach
    done = ok.copy()
    for t in list(range(a + 1, n)) + list(range(a - 1, -1, -1)):
        if done[t]:
            continue
        lo, hi = max(t - half, 0), min(t + half, n - 1)
        cand = np.flatnonzero(done[lo:hi + 1]) + lo
        if cand.size == 0:
            continue
        b = int(cand[np.argmax(np.abs(out[cand]))])
        if abs(out[b]) <= threshold * np.sqrt(max(scale * du, 1e-300)):
            continue
        rb, okb = column(np.array([t]), b)
        if okb[0]:
            out[t] = rb[0] / np.conj(out[b])
            done[t] = True
    return SampledSignal(out_grid, out)


def cmcd_reconstruct(C: TFDistribution, Pi: TFDistribution, mwd_cfg: MWDConfig, gmc, ygrid: UniformGrid,
                     eps: float = 1e-6, atol: float = 1e-12) -> SampledSignal:
    """Recover f, up to the factor conj(mu(M2) f(0)), from its CMCD.

    The kernel is divided out spectrally, the MWD is taken back to lag 0 and
    mu(M1^{-1}) is applied along the resulting time axis.
    """
    from .gmconv import deconvolve

    m3 = mwd_cfg.M3
    if abs(m3.A[0, 0]) > atol:
        raise ConstraintViolated("reconstruction needs A3 = 0")
    if not np.any(np.abs(Pi.values) > 0):
        raise IllConditionedQuotient("kernel is identically zero")
    M = mwd_cfg.M
    if M.b_singular():
        raise ConstraintViolated("reconstruction needs det(B) != 0 for M")
    W = deconvolve(C, Pi, gmc, eps)
    # inverse partial transform, evaluated at lag y = 0 only
    k0 = mp.kernel(inverse(M), 0.0, W.ugrid.points) * W.ugrid.step
    t0 = (W.values @ k0) / mp.inversion_constant(M)
    # t0(x) = sqrt|det M3 I| * phi1(x b3) * conj(phi2(0))
    t0 = t0 / np.sqrt(abs(np.linalg.det(_swap_product(m3))))
    b3 = m3.B[0, 0]
    s_pts = W.xgrid.points * b3
    order = np.argsort(s_pts)
    sgrid = UniformGrid(float(s_pts[order][0]), abs(b3) * W.xgrid.step, W.xgrid.count)
    m1 = mwd_cfg.M1
    phi, sgrid = _refine_for_inverse(t0[order], sgrid, m1, float(np.max(np.abs(ygrid.points))))
    vals = mp.eval_points_1d(phi, sgrid, inverse(m1), ygrid.points) / mp.inversion_constant(m1)
    return SampledSignal(ygrid, vals)


def _refine_for_inverse(phi: np.ndarray, grid: UniformGrid, m1: SymplecticMatrix, reach: float):
    """Resample mu(M1) f finely enough for the quadrature of mu(M1^{-1}) up to |y| = reach.

    The quadrature integrand carries exp(2 pi i y s / B1); its step must stay
    below |B1| / (2 reach).  The known chirp exp(pi i D1/B1 s^2) is removed
    before the band-limited (FFT) upsampling and restored afterwards.
    """
    if m1.b_singular() or reach == 0.0:
        return phi, grid
    b, d = m1.B[0, 0], m1.D[0, 0]
    k = 1
    while grid.step / k > abs(b) / (2 * reach) and k < 64:
        k *= 2
    if k == 1:
        return phi, grid
    s = grid.points
    g = phi * np.exp(-1j * np.pi * d / b * s**2)
    n = g.size
    spec = sfft.fftshift(sfft.fft(g))
    pad = np.zeros(k * n, dtype=complex)
    i0 = (k * n) // 2 - n // 2
    pad[i0:i0 + n] = spec
    fine = UniformGrid(grid.start, grid.step / k, k * n)
    gf = sfft.ifft(sfft.ifftshift(pad)) * k
    return gf * np.exp(1j * np.pi * d / b * fine.points**2), fine
