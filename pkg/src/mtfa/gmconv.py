"""Generalized metaplectic convolution on the (x, u) plane.

    (F o G)(z) = exp(-pi i z F6 z^T) [ (F exp(pi i z F4 z^T)) * (G exp(pi i z F5 z^T)) ](z)

with F_j = B_j^{-1} A_j for three 4x4 symplectic matrices.  The direct path is
a linear discrete convolution; the spectral path multiplies metaplectic
spectra and transforms back with the exact inverse of mu(M6).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import fft as sfft

from . import metaplectic as mp
from .signals import GridMismatch, UniformGrid
from .symplectic import SymplecticMatrix, from_blocks, inverse, special
from .tfd import TFDistribution


@dataclass(frozen=True)
class GMCMatrices:
    M4: SymplecticMatrix
    M5: SymplecticMatrix
    M6: SymplecticMatrix
    F4: np.ndarray = field(init=False, repr=False, compare=False)
    F5: np.ndarray = field(init=False, repr=False, compare=False)
    F6: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("M4", "M5", "M6"):
            m = getattr(self, name)
            if m.n != 2:
                raise ValueError(f"{name} must be 4x4")
            if m.b_singular():
                raise mp.SingularB(f"{name} has a singular B block")
            object.__setattr__(self, "F" + name[1], np.linalg.solve(m.B, m.A))

    @classmethod
    def classical(cls) -> "GMCMatrices":
        j = special("J", 2)
        return cls(j, j, j)

    @classmethod
    def tied(cls, m: SymplecticMatrix) -> "GMCMatrices":
        return cls(m, m, m)

    def is_classical(self) -> bool:
        return self == GMCMatrices.classical()

    def family(self) -> str:
        """Label of the parameter family (conventional, I-, II-, IV-type or general)."""
        j = special("J", 2)
        if self.M4 == j and self.M5 == j and self.M6 == j:
            return "conventional"
        if self.M4 == self.M5 == self.M6:
            return "II-type"
        if self.M5 == j and self.M4 == self.M6:
            return "I-type"
        if self.M4 == self.M5 and self.M6.allclose(iv_partner(self.M4), 1e-12):
            return "IV-type"
        return "general"


def iv_partner(m4: SymplecticMatrix) -> SymplecticMatrix:
    r = np.sqrt(2.0)
    return from_blocks(m4.A / r, r * m4.B, m4.C / r, r * m4.D, tol=1e-9)


def chirp(q: np.ndarray, grids, sign: float = 1.0) -> np.ndarray:
    """exp(sign * pi i z q z^T) on the product grid (read-only, cached)."""
    q = np.asarray(q, dtype=float)
    return _chirp(tuple(q.ravel()), tuple(grids), float(sign))


@lru_cache(maxsize=12)
def _chirp(q, grids, sign):
    x = grids[0].points[:, None]
    u = grids[1].points[None, :]
    if q == (0.0, 0.0, 0.0, 0.0):
        out = np.ones((x.size, u.size), dtype=complex)
    else:
        ph = q[0] * x * x + (q[1] + q[2]) * x * u + q[3] * u * u
        out = np.exp(sign * 1j * np.pi * ph)
    out.setflags(write=False)
    return out


def epsilon_factor(m: GMCMatrices, u) -> complex | np.ndarray:
    u = np.asarray(u, dtype=float)
    b4, b5, b6 = m.M4.B, m.M5.B, m.M6.B
    d4, d5, d6 = m.M4.D, m.M5.D, m.M6.D
    b6inv = np.linalg.inv(b6)
    q = d6 @ b6inv - b6inv.T @ b4.T @ d4 @ b6inv - b6inv.T @ b5.T @ d5 @ b6inv
    amp = np.sqrt(complex(-np.linalg.det(b4) * np.linalg.det(b5) / np.linalg.det(b6)))
    return amp * np.exp(1j * np.pi * mp._quad(u, q))


# -- direct path ---------------------------------------------------------------

def _offset(fgrid: UniformGrid, ggrid: UniformGrid) -> int:
    if not np.isclose(fgrid.step, ggrid.step, rtol=1e-9, atol=0):
        raise GridMismatch("convolution operands need equal grid steps")
    k = ggrid.start / ggrid.step
    if abs(k - round(k)) > 1e-6:
        raise GridMismatch("kernel grid must be aligned with the lattice through 0")
    return int(round(k))


class LinearConvolver:
    """Linear convolution with a fixed kernel ``b``; its spectrum is computed once.

    ``conv(a)`` returns sum_j a(z_j) b(z - z_j) * cell on ``agrids``, with ``b``
    living on a lattice through 0.
    """

    def __init__(self, agrids, b: np.ndarray, bgrids):
        ashape = (agrids[0].count, agrids[1].count)
        shape, sl = [], []
        for ax in range(2):
            na, nb = ashape[ax], b.shape[ax]
            off = -_offset(agrids[ax], bgrids[ax])  # full-convolution index of output sample 0
            lf = na + nb - 1
            # circular length that keeps wrapped terms away from the needed window
            shape.append(sfft.next_fast_len(max(off + na, lf - max(off, 0), 1)))
            i = np.arange(off, off + na)
            sl.append((i, (i >= 0) & (i < lf)))
        self.shape = tuple(shape)
        self.ashape = ashape
        self.sl = sl
        self.cell = agrids[0].step * agrids[1].step
        self.fb = sfft.fft2(b, s=self.shape)

    def __call__(self, a: np.ndarray) -> np.ndarray:
        if a.shape != self.ashape:
            raise GridMismatch("operand shape differs from the planned one")
        full = sfft.ifft2(sfft.fft2(a, s=self.shape) * self.fb)
        (i0, v0), (i1, v1) = self.sl
        out = np.zeros(a.shape, dtype=complex)
        out[np.ix_(v0, v1)] = full[np.ix_(i0[v0], i1[v1])]
        return out * self.cell


def linear_convolve(a: np.ndarray, agrids, b: np.ndarray, bgrids) -> np.ndarray:
    """sum_j a(z_j) b(z - z_j) * cell on ``agrids``; ``b`` lives on a lattice through 0."""
    return LinearConvolver(agrids, b, bgrids)(a)


def convolve_direct(F: TFDistribution, G: TFDistribution, m: GMCMatrices) -> TFDistribution:
    """Chirped linear convolution; the output lives on F's grid.

    G may sit on a different grid with the same steps provided its lattice
    passes through the origin (kernels and filters on lag grids).
    """
    c4 = chirp(m.F4, F.grids)
    c5 = chirp(m.F5, G.grids)
    conv = linear_convolve(F.values * c4, F.grids, G.values * c5, G.grids)
    return F.with_values(conv * chirp(m.F6, F.grids, -1.0))


# -- spectral path -------------------------------------------------------------

def _xi_grid(g: UniformGrid, oversample: int) -> np.ndarray:
    p = oversample * g.count
    return (np.arange(p) - p // 2) / (p * g.step)


def _forward(values, grids, m: SymplecticMatrix, xis) -> np.ndarray:
    """mu(M) F on the lattice u = xi B^T, xi from the product grid ``xis``."""
    binv = np.linalg.inv(m.B)
    h = values * chirp(binv @ m.A, grids)
    e0 = np.exp(-2j * np.pi * np.outer(xis[0], grids[0].points)) * grids[0].step
    e1 = np.exp(-2j * np.pi * np.outer(xis[1], grids[1].points)) * grids[1].step
    spec = e0 @ h @ e1.T
    xi = np.stack(np.meshgrid(xis[0], xis[1], indexing="ij"), -1)
    u = xi @ m.B.T
    return mp.constant(m) * np.exp(1j * np.pi * mp._quad(u, m.D @ binv)) * spec


def _backward(phi, xis, m6: SymplecticMatrix, grids) -> np.ndarray:
    """Exact inverse of mu(M6) from samples on u = xi B6^T back to ``grids``."""
    minv = inverse(m6)
    b = minv.B  # = -B6^T
    binv = np.linalg.inv(b)
    xi = np.stack(np.meshgrid(xis[0], xis[1], indexing="ij"), -1)
    u = xi @ m6.B.T
    h = phi * np.exp(1j * np.pi * mp._quad(u, binv @ minv.A))
    # -2 pi i u B'^{-1} z^T = +2 pi i xi . z  since u B'^{-1} = -xi
    e0 = np.exp(2j * np.pi * np.outer(grids[0].points, xis[0]))
    e1 = np.exp(2j * np.pi * np.outer(grids[1].points, xis[1]))
    dxi = (xis[0][1] - xis[0][0]) * (xis[1][1] - xis[1][0])
    s = e0 @ h @ e1.T * abs(np.linalg.det(m6.B)) * dxi
    z = np.stack(np.meshgrid(grids[0].points, grids[1].points, indexing="ij"), -1)
    out = mp.constant(minv) * np.exp(1j * np.pi * mp._quad(z, minv.D @ binv)) * s
    return out / mp.inversion_constant(m6)


def convolve_spectral(F: TFDistribution, G: TFDistribution, m: GMCMatrices, oversample: int = 1) -> TFDistribution:
    """Product of metaplectic spectra (weighted by epsilon) taken back through mu(M6)^{-1}."""
    F.require_same_grid(G)
    xis = (_xi_grid(F.xgrid, oversample), _xi_grid(F.ugrid, oversample))
    # u = xi B6^T gives u B6^{-T} B_j^T = xi B_j^T, i.e. the lattice of each factor
    p4 = _forward(F.values, F.grids, m.M4, xis)
    p5 = _forward(G.values, G.grids, m.M5, xis)
    xi = np.stack(np.meshgrid(xis[0], xis[1], indexing="ij"), -1)
    eps = epsilon_factor(m, xi @ m.M6.B.T)
    return F.with_values(_backward(eps * p4 * p5, xis, m.M6, F.grids))


def deconvolve(C: TFDistribution, K: TFDistribution, m: GMCMatrices, eps: float = 1e-6) -> TFDistribution:
    """Regularized inverse of ``convolve_direct(., K, m)`` on C's grid."""
    a = C.values * chirp(m.F6, C.grids)
    k = K.values * chirp(m.F5, K.grids)
    shape = [sfft.next_fast_len(2 * n) for n in a.shape]
    # place the kernel in FFT (wrapped) order: lag index l sits at l mod size
    kw = np.zeros(shape, dtype=complex)
    g0 = [_offset(C.grids[ax], K.grids[ax]) for ax in range(2)]
    idx0 = (np.arange(k.shape[0]) + g0[0]) % shape[0]
    idx1 = (np.arange(k.shape[1]) + g0[1]) % shape[1]
    np.add.at(kw, np.ix_(idx0, idx1), k)
    fk = sfft.fft2(kw) * C.cell
    fa = sfft.fft2(a, s=shape)
    den = np.abs(fk) ** 2
    top = den.max()
    if top == 0:
        raise ZeroDivisionError("kernel spectrum vanishes")
    w = sfft.ifft2(fa * np.conj(fk) / (den + eps * top))[: a.shape[0], : a.shape[1]]
    return C.with_values(w * chirp(m.F4, C.grids, -1.0))
