"""Fields on uniform 2-D grids and their CSV / binary serializations."""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass

import numpy as np

from .signals import GridMismatch, UniformGrid


@dataclass(frozen=True, eq=False)
class TFDistribution:
    """Complex values on ``xgrid`` x ``ugrid``; ``values[i, k]`` sits at (x_i, u_k)."""

    xgrid: UniformGrid
    ugrid: UniformGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.xgrid.count, self.ugrid.count):
            raise ValueError(f"values shape {v.shape} does not match grids "
                             f"({self.xgrid.count}, {self.ugrid.count})")
        if not np.all(np.isfinite(v)):
            raise ValueError("distribution contains non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def cell(self) -> float:
        return self.xgrid.step * self.ugrid.step

    @property
    def grids(self) -> tuple[UniformGrid, UniformGrid]:
        return self.xgrid, self.ugrid

    def with_values(self, values) -> "TFDistribution":
        return TFDistribution(self.xgrid, self.ugrid, values)

    def same_grid(self, other: "TFDistribution") -> bool:
        return self.xgrid.same_as(other.xgrid) and self.ugrid.same_as(other.ugrid)

    def require_same_grid(self, other: "TFDistribution") -> None:
        if not self.same_grid(other):
            raise GridMismatch("distributions are defined on different grids")

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.xgrid.points, self.ugrid.points, indexing="ij")

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))


def write_csv(d: TFDistribution, path) -> None:
    x, u = d.mesh()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "u", "re", "im"])
        for xi, ui, v in zip(x.ravel(), u.ravel(), d.values.ravel()):
            w.writerow([repr(float(xi)), repr(float(ui)), repr(float(v.real)), repr(float(v.imag))])


def _grid_from_points(p: np.ndarray) -> UniformGrid:
    p = np.unique(np.round(p, 12))
    if p.size == 1:
        return UniformGrid(float(p[0]), 1.0, 1)
    step = (p[-1] - p[0]) / (p.size - 1)
    if np.max(np.abs(np.diff(p) - step)) > 1e-6 * step:
        raise ValueError("distribution CSV axis is not uniform")
    return UniformGrid(float(p[0]), float(step), p.size)


def read_csv(path) -> TFDistribution:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    xg = _grid_from_points(data[:, 0])
    ug = _grid_from_points(data[:, 1])
    ix = np.rint((data[:, 0] - xg.start) / xg.step).astype(int)
    iu = np.rint((data[:, 1] - ug.start) / ug.step).astype(int)
    vals = np.zeros((xg.count, ug.count), dtype=complex)
    vals[ix, iu] = data[:, 2] + 1j * data[:, 3]
    return TFDistribution(xg, ug, vals)


# Binary layout: 16-byte header of two little-endian uint64 counts (nx, nu),
# then nx*nu quadruples (x, u, re, im) as little-endian float64, row-major.
_HEADER = struct.Struct("<QQ")


def write_binary(d: TFDistribution, path) -> None:
    x, u = d.mesh()
    quad = np.stack([x.ravel(), u.ravel(), d.values.real.ravel(), d.values.imag.ravel()], axis=1)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(d.xgrid.count, d.ugrid.count))
        fh.write(quad.astype("<f8").tobytes())


def read_binary(path) -> TFDistribution:
    with open(path, "rb") as fh:
        nx, nu = _HEADER.unpack(fh.read(_HEADER.size))
        quad = np.frombuffer(fh.read(), dtype="<f8").reshape(nx * nu, 4)
    x = quad[:, 0].reshape(nx, nu)[:, 0]
    u = quad[:, 1].reshape(nx, nu)[0, :]
    xg = _grid_from_points(x) if nx > 1 else UniformGrid(float(x[0]), 1.0, 1)
    ug = _grid_from_points(u) if nu > 1 else UniformGrid(float(u[0]), 1.0, 1)
    return TFDistribution(xg, ug, (quad[:, 2] + 1j * quad[:, 3]).reshape(nx, nu))


def aligned_residual(lhs: np.ndarray, rhs: np.ndarray, floor: float = 1e-12) -> tuple[float, complex]:
    """Relative l2 residual ||lhs - c rhs|| / ||lhs|| with the best unimodular c."""
    lhs = np.asarray(lhs).ravel()
    rhs = np.asarray(rhs).ravel()
    ip = np.vdot(rhs, lhs)
    c = ip / abs(ip) if abs(ip) > 0 else 1.0 + 0j
    den = max(np.linalg.norm(lhs), floor)
    return float(np.linalg.norm(lhs - c * rhs) / den), complex(c)


def rel_residual(lhs: np.ndarray, rhs: np.ndarray, floor: float = 1e-12) -> float:
    lhs = np.asarray(lhs).ravel()
    rhs = np.asarray(rhs).ravel()
    return float(np.linalg.norm(lhs - rhs) / max(np.linalg.norm(lhs), floor))


def correlation(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    return float(abs(np.vdot(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b)))
