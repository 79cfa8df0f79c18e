"""Discrete metaplectic transforms for one- and two-dimensional fields.

For det(B) != 0 the transform is the integral against the chirp-Fourier-chirp
kernel; with xi = u B^{-T} it factors as

    mu(M) f(u) = c_M * exp(pi i u D B^{-1} u^T) * DTFT[f * exp(pi i x B^{-1} A x^T)](xi),
    c_M = 1 / sqrt(-det B)   (principal branch).

For det(B) == 0 the transform is a chirped change of variables
sqrt(det D) exp(pi i u C D^T u^T) f(u D), resampled by linear interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .signals import SampledSignal, UniformGrid
from .symplectic import SymplecticMatrix, inverse
from .tfd import TFDistribution

SINGULAR_TOL = 1e-12
_CHUNK = 8192


class SingularB(ValueError):
    pass


class PlanMismatch(ValueError):
    pass


class NonconformingGrid(ValueError):
    pass


def _csqrt(z) -> complex:
    return complex(np.sqrt(complex(z)))


def constant(m: SymplecticMatrix, fourier_normalized: bool = False) -> complex:
    """Kernel prefactor 1/sqrt(-det B); unimodular part dropped if normalized."""
    d = m.det_b
    if abs(d) <= SINGULAR_TOL:
        raise SingularB("kernel requires det(B) != 0")
    if fourier_normalized:
        return 1.0 / np.sqrt(abs(d)) + 0j
    return 1.0 / _csqrt(-d)


def singular_constant(m: SymplecticMatrix) -> complex:
    return _csqrt(np.linalg.det(m.D))


def inversion_constant(m: SymplecticMatrix) -> complex:
    """c with mu(M^{-1}) mu(M) = c * Id under the principal branch."""
    if m.b_singular():
        return singular_constant(m) * _csqrt(np.linalg.det(m.A))
    binv = inverse(m)
    return abs(m.det_b) * constant(m) * constant(binv)


def _quad(x: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Quadratic form x q x^T for points stored along the last axis."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] == 2:
        a, b = x[..., 0], x[..., 1]
        return q[0, 0] * a * a + (q[0, 1] + q[1, 0]) * a * b + q[1, 1] * b * b
    return np.einsum("...i,ij,...j->...", x, q, x)


def kernel(m: SymplecticMatrix, natural, sharp, fourier_normalized: bool = False):
    """K_M(natural, sharp); arrays of points broadcast (last axis = dimension for N=2)."""
    nat = np.asarray(natural, dtype=float)
    sh = np.asarray(sharp, dtype=float)
    binv = np.linalg.inv(m.B) if not m.b_singular() else None
    if binv is None:
        raise SingularB("kernel requires det(B) != 0")
    c = constant(m, fourier_normalized)
    if m.n == 1:
        b, a, d = m.B[0, 0], m.A[0, 0], m.D[0, 0]
        ph = (d / b) * nat**2 + (a / b) * sh**2 - 2 * sh * nat / b
        return c * np.exp(1j * np.pi * ph)
    ph = _quad(nat, m.D @ binv) + _quad(sh, binv @ m.A) - 2 * np.einsum("...i,ij,...j->...", sh, binv, nat)
    return c * np.exp(1j * np.pi * ph)


# -- one-dimensional transforms ------------------------------------------------

def conjugate_output_grid(grid: UniformGrid, m: SymplecticMatrix) -> UniformGrid:
    if m.b_singular():
        raise SingularB("no FFT-conjugate grid when det(B) = 0")
    return grid.conjugate(scale=float(m.B[0, 0]))


def _build_matrix_1d(m, in_grid, u, fourier_normalized):
    return kernel(m, u[:, None], in_grid.points[None, :], fourier_normalized) * in_grid.step


@lru_cache(maxsize=16)
def _cached_matrix_1d(m: SymplecticMatrix, in_grid: UniformGrid, out_key: bytes, fourier_normalized: bool):
    return _build_matrix_1d(m, in_grid, np.frombuffer(out_key, dtype=float), fourier_normalized)


def direct_matrix_1d(m: SymplecticMatrix, in_grid: UniformGrid, out_points, fourier_normalized: bool = False):
    """Quadrature matrix of mu(M) from ``in_grid`` to ``out_points`` (cached when small)."""
    out = np.ascontiguousarray(np.asarray(out_points, dtype=float))
    if out.size * in_grid.count > 1_500_000:
        return _build_matrix_1d(m, in_grid, out, fourier_normalized)
    return _cached_matrix_1d(m, in_grid, out.tobytes(), fourier_normalized)


def _singular_1d(values: np.ndarray, in_grid: UniformGrid, m: SymplecticMatrix, u: np.ndarray, axis: int = -1):
    c, d = m.C[0, 0], m.D[0, 0]
    pts = u * d
    x = in_grid.points
    # points that miss the end nodes only by rounding are pulled back inside
    tol = 1e-9 * in_grid.step
    pts = np.where((pts < x[0]) & (pts > x[0] - tol), x[0], pts)
    pts = np.where((pts > x[-1]) & (pts < x[-1] + tol), x[-1], pts)
    vals = np.moveaxis(np.asarray(values, dtype=complex), axis, -1)
    flat = vals.reshape(-1, vals.shape[-1])
    out = np.empty((flat.shape[0], u.size), dtype=complex)
    for i, row in enumerate(flat):
        out[i] = np.interp(pts, x, row.real, left=0.0, right=0.0) + 1j * np.interp(pts, x, row.imag, left=0.0, right=0.0)
    out *= singular_constant(m) * np.exp(1j * np.pi * c * d * u**2)
    out = out.reshape(vals.shape[:-1] + (u.size,))
    return np.moveaxis(out, -1, axis)


def _chirpfft_1d(values: np.ndarray, in_grid: UniformGrid, m: SymplecticMatrix, axis: int, fourier_normalized: bool):
    """Chirp - FFT - chirp along ``axis``; output on the B-scaled conjugate grid."""
    a, b, d = m.A[0, 0], m.B[0, 0], m.D[0, 0]
    n = in_grid.count
    x = in_grid.points
    vals = np.moveaxis(np.asarray(values, dtype=complex), axis, -1)
    h = vals * np.exp(1j * np.pi * (a / b) * x**2)
    k = np.arange(n) - n // 2
    xi = k / (n * in_grid.step)
    spec = np.fft.fft(h, axis=-1)[..., k % n]
    spec *= np.exp(-2j * np.pi * in_grid.start * xi) * in_grid.step
    u = xi * b
    out = constant(m, fourier_normalized) * np.exp(1j * np.pi * (d / b) * u**2) * spec
    if b < 0:
        out = out[..., ::-1]
    return np.moveaxis(out, -1, axis)


def transform_axis(values, in_grid: UniformGrid, m: SymplecticMatrix, axis: int = -1, method: str = "auto",
                   out_grid: UniformGrid | None = None, fourier_normalized: bool = False):
    """Apply mu(M) (n=1) along one axis of ``values``; returns (array, out_grid)."""
    if m.n != 1:
        raise NonconformingGrid("transform_axis needs a 2x2 matrix")
    vals = np.asarray(values, dtype=complex)
    if vals.shape[axis] != in_grid.count:
        raise NonconformingGrid("axis length does not match the input grid")
    if m.b_singular():
        if method == "chirpfft":
            raise PlanMismatch("ChirpFFT needs det(B) != 0")
        og = out_grid or in_grid
        return _singular_1d(vals, in_grid, m, og.points, axis), og
    conj = conjugate_output_grid(in_grid, m)
    if method == "auto":
        method = "chirpfft" if out_grid is None or out_grid.same_as(conj) else "direct"
    if method == "chirpfft":
        if out_grid is not None and not out_grid.same_as(conj):
            raise PlanMismatch("ChirpFFT output must be the B-scaled FFT-conjugate grid")
        return _chirpfft_1d(vals, in_grid, m, axis, fourier_normalized), conj
    if method != "direct":
        raise PlanMismatch(f"unknown method {method!r}")
    og = out_grid or conj
    k = direct_matrix_1d(m, in_grid, og.points, fourier_normalized)
    out = np.tensordot(np.moveaxis(vals, axis, -1), k.T, axes=1)
    return np.moveaxis(out, -1, axis), og


def eval_points_1d(values, in_grid: UniformGrid, m: SymplecticMatrix, points, fourier_normalized: bool = False):
    """mu(M) f at arbitrary points (direct quadrature, or interpolation if det B = 0)."""
    pts = np.asarray(points, dtype=float)
    vals = np.asarray(values, dtype=complex)
    if m.b_singular():
        return _singular_1d(vals, in_grid, m, pts.ravel()).reshape(pts.shape)
    out = np.empty(pts.size, dtype=complex)
    flat = pts.ravel()
    for s in range(0, flat.size, _CHUNK):
        k = kernel(m, flat[s:s + _CHUNK, None], in_grid.points[None, :], fourier_normalized)
        out[s:s + _CHUNK] = (k @ vals) * in_grid.step
    return out.reshape(pts.shape)


@dataclass(frozen=True)
class TransformPlan:
    matrix: SymplecticMatrix
    in_grid: UniformGrid
    method: str = "auto"
    out_grid: UniformGrid | None = None
    fourier_normalized: bool = False


def mt(f, m: SymplecticMatrix, method: str = "auto", out_grid=None, fourier_normalized: bool = False):
    """Metaplectic transform of a SampledSignal (n=1) or TFDistribution (n=2).

    ``out_grid`` is a UniformGrid for signals and a pair of grids for 2-D fields.
    """
    if isinstance(f, SampledSignal):
        if m.n != 1:
            raise NonconformingGrid("a 1-D signal needs a 2x2 matrix")
        vals, og = transform_axis(f.values, f.grid, m, -1, method, out_grid, fourier_normalized)
        return SampledSignal(og, vals)
    if isinstance(f, TFDistribution):
        if m.n != 2:
            raise NonconformingGrid("a 2-D field needs a 4x4 matrix")
        return _mt2(f, m, method, out_grid, fourier_normalized)
    raise TypeError("mt expects a SampledSignal or TFDistribution")


def inverse_mt(f, m: SymplecticMatrix, method: str = "auto", out_grid=None):
    """Exact inverse of ``mt(., m)``: mu(M^{-1}) divided by the branch constant."""
    c = inversion_constant(m)
    g = mt(f, inverse(m), method, out_grid)
    if isinstance(g, SampledSignal):
        return SampledSignal(g.grid, g.values / c)
    return g.with_values(g.values / c)


def partial_mt2(h, xgrid: UniformGrid, ygrid: UniformGrid, m: SymplecticMatrix, method: str = "auto",
                out_grid: UniformGrid | None = None, fourier_normalized: bool = False) -> TFDistribution:
    """Apply mu(M) along the second axis of h(x, y); the first axis is untouched."""
    vals, og = transform_axis(h, ygrid, m, 1, method, out_grid, fourier_normalized)
    return TFDistribution(xgrid, og, vals)


# -- two-dimensional transforms ------------------------------------------------

def _is_diag(a: np.ndarray) -> bool:
    return np.count_nonzero(a - np.diag(np.diag(a))) == 0


def dtft2_at(values: np.ndarray, grids, xi: np.ndarray) -> np.ndarray:
    """sum_x values(x) exp(-2 pi i x . xi) dx at scattered xi points (P, 2)."""
    g1, g2 = grids
    x1, x2 = g1.points, g2.points
    xi = np.asarray(xi, dtype=float).reshape(-1, 2)
    out = np.empty(xi.shape[0], dtype=complex)
    for s in range(0, xi.shape[0], _CHUNK):
        p = xi[s:s + _CHUNK]
        e2 = np.exp(-2j * np.pi * np.outer(x2, p[:, 1]))  # (N2, P)
        t = values @ e2  # (N1, P)
        e1 = np.exp(-2j * np.pi * np.outer(x1, p[:, 0]))  # (N1, P)
        out[s:s + _CHUNK] = np.einsum("ip,ip->p", e1, t)
    return out * g1.step * g2.step


def eval_points_2d(values, grids, m: SymplecticMatrix, points, fourier_normalized: bool = False):
    """mu(M) F at scattered points (P, 2) by direct quadrature."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    vals = np.asarray(values, dtype=complex)
    if m.b_singular():
        return _singular_2d_points(vals, grids, m, pts)
    binv = np.linalg.inv(m.B)
    x1, x2 = np.meshgrid(grids[0].points, grids[1].points, indexing="ij")
    xx = np.stack([x1, x2], axis=-1)
    h = vals * np.exp(1j * np.pi * _quad(xx, binv @ m.A))
    # x B^{-1} u^T = x . xi with xi = u B^{-T}
    xi = pts @ binv.T
    spec = dtft2_at(h, grids, xi)
    return constant(m, fourier_normalized) * np.exp(1j * np.pi * _quad(pts, m.D @ binv)) * spec


def _singular_2d_points(vals, grids, m: SymplecticMatrix, pts):
    interp_re = RegularGridInterpolator((grids[0].points, grids[1].points), vals.real, bounds_error=False, fill_value=0.0)
    interp_im = RegularGridInterpolator((grids[0].points, grids[1].points), vals.imag, bounds_error=False, fill_value=0.0)
    q = pts @ m.D
    f = interp_re(q) + 1j * interp_im(q)
    return singular_constant(m) * np.exp(1j * np.pi * _quad(pts, m.C @ m.D.T)) * f


def _mt2(f: TFDistribution, m: SymplecticMatrix, method, out_grid, fourier_normalized):
    grids = f.grids
    if m.b_singular():
        og = out_grid or grids
        u1, u2 = np.meshgrid(og[0].points, og[1].points, indexing="ij")
        pts = np.stack([u1.ravel(), u2.ravel()], axis=1)
        vals = _singular_2d_points(f.values, grids, m, pts).reshape(u1.shape)
        return TFDistribution(og[0], og[1], vals)
    diag_b = _is_diag(m.B)
    conj = None
    if diag_b:
        conj = (grids[0].conjugate(float(m.B[0, 0])), grids[1].conjugate(float(m.B[1, 1])))
    if method == "auto":
        method = "chirpfft" if diag_b and (out_grid is None or (out_grid[0].same_as(conj[0]) and out_grid[1].same_as(conj[1]))) else "direct"
    if method == "chirpfft":
        if not diag_b:
            raise PlanMismatch("2-D ChirpFFT needs a diagonal B block")
        if out_grid is not None and not (out_grid[0].same_as(conj[0]) and out_grid[1].same_as(conj[1])):
            raise PlanMismatch("ChirpFFT output must be the B-scaled FFT-conjugate grid")
        binv = np.linalg.inv(m.B)
        x1, x2 = np.meshgrid(grids[0].points, grids[1].points, indexing="ij")
        h = f.values * np.exp(1j * np.pi * _quad(np.stack([x1, x2], -1), binv @ m.A))
        spec = h
        for ax, g in enumerate(grids):
            n = g.count
            k = np.arange(n) - n // 2
            xi = k / (n * g.step)
            spec = np.take(np.fft.fft(spec, axis=ax), k % n, axis=ax)
            shape = [1, 1]
            shape[ax] = n
            spec = spec * (np.exp(-2j * np.pi * g.start * xi) * g.step).reshape(shape)
        u1 = (np.arange(grids[0].count) - grids[0].count // 2) / (grids[0].count * grids[0].step) * m.B[0, 0]
        u2 = (np.arange(grids[1].count) - grids[1].count // 2) / (grids[1].count * grids[1].step) * m.B[1, 1]
        uu = np.stack(np.meshgrid(u1, u2, indexing="ij"), -1)
        vals = constant(m, fourier_normalized) * np.exp(1j * np.pi * _quad(uu, m.D @ binv)) * spec
        if m.B[0, 0] < 0:
            vals = vals[::-1, :]
        if m.B[1, 1] < 0:
            vals = vals[:, ::-1]
        return TFDistribution(conj[0], conj[1], vals)
    if method != "direct":
        raise PlanMismatch(f"unknown method {method!r}")
    if out_grid is None:
        if conj is None:
            raise PlanMismatch("direct 2-D transform with non-diagonal B needs an explicit output grid")
        out_grid = conj
    u1, u2 = np.meshgrid(out_grid[0].points, out_grid[1].points, indexing="ij")
    pts = np.stack([u1.ravel(), u2.ravel()], axis=1)
    vals = eval_points_2d(f.values, grids, m, pts, fourier_normalized).reshape(u1.shape)
    return TFDistribution(out_grid[0], out_grid[1], vals)
