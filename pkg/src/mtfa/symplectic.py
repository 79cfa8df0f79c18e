"""Symplectic matrices in the row-vector convention.

A real 2N x 2N matrix M = [[A, B], [C, D]] is symplectic when
M J M^T = J with J = [[0, I], [-I, 0]].  Points are row vectors and are
mapped as x -> x M everywhere in this package.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.linalg import expm, logm

DEFAULT_TOL = 1e-10
# exp_param refuses Hamiltonians whose Frobenius norm exceeds this value;
# beyond it entries of exp(H) reach ~e^50 and the group law check is
# dominated by rounding.
PARAM_NORM_CAP = 50.0


class NotSymplectic(ValueError):
    def __init__(self, residual: float, tol: float):
        super().__init__(f"matrix is not symplectic: |MJM^T - J|_inf = {residual:.3e} > {tol:.1e}")
        self.residual = residual


class OddDimension(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class UnknownName(ValueError):
    pass


class SymplecticOverflow(OverflowError):
    pass


def jmat(n: int) -> np.ndarray:
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, eye], [-eye, zero]])


def residual(entries: np.ndarray) -> float:
    m = np.asarray(entries, dtype=float)
    j = jmat(m.shape[0] // 2)
    return float(np.max(np.abs(m @ j @ m.T - j)))


@dataclass(frozen=True, eq=False)
class SymplecticMatrix:
    entries: np.ndarray

    @property
    def n(self) -> int:
        return self.entries.shape[0] // 2

    @property
    def A(self) -> np.ndarray:
        return self.entries[: self.n, : self.n]

    @property
    def B(self) -> np.ndarray:
        return self.entries[: self.n, self.n :]

    @property
    def C(self) -> np.ndarray:
        return self.entries[self.n :, : self.n]

    @property
    def D(self) -> np.ndarray:
        return self.entries[self.n :, self.n :]

    @property
    def det_b(self) -> float:
        return float(np.linalg.det(self.B))

    def b_singular(self, tol: float = 1e-12) -> bool:
        return abs(self.det_b) <= tol

    def __matmul__(self, other: "SymplecticMatrix") -> "SymplecticMatrix":
        return compose(self, other)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SymplecticMatrix):
            return NotImplemented
        return self.entries.shape == other.entries.shape and np.array_equal(self.entries, other.entries)

    def __hash__(self) -> int:
        return hash(self.entries.tobytes())

    def allclose(self, other: "SymplecticMatrix", atol: float = 1e-10) -> bool:
        return np.allclose(self.entries, other.entries, rtol=0.0, atol=atol)

    def __repr__(self) -> str:
        rows = np.array2string(self.entries, precision=6, suppress_small=True)
        return f"SymplecticMatrix(n={self.n}, {rows})"


def validate(entries, tol: float = DEFAULT_TOL) -> SymplecticMatrix:
    if tol <= 0:
        raise ValueError("tol must be positive")
    m = np.array(entries, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise OddDimension(f"expected a square matrix, got shape {m.shape}")
    if m.shape[0] == 0 or m.shape[0] % 2:
        raise OddDimension(f"dimension {m.shape[0]} is not even")
    if not np.all(np.isfinite(m)):
        raise NotSymplectic(float("inf"), tol)
    res = residual(m)
    if res > tol:
        raise NotSymplectic(res, tol)
    # det(M) = 1 follows from the group law; a looser check guards against
    # pathological round-off in huge entries.
    det = np.linalg.det(m)
    if abs(det - 1.0) > max(1e-8, 1e-8 * np.max(np.abs(m)) ** m.shape[0]):
        raise NotSymplectic(abs(det - 1.0), tol)
    m.setflags(write=False)
    return SymplecticMatrix(m)


def from_blocks(a, b, c, d, tol: float = DEFAULT_TOL) -> SymplecticMatrix:
    a, b, c, d = (np.atleast_2d(np.asarray(x, dtype=float)) for x in (a, b, c, d))
    return validate(np.block([[a, b], [c, d]]), tol)


def special(name: str, n: int = 1, tau: float | None = None) -> SymplecticMatrix:
    """Named matrices: J, I2N, PI, TauWigner (needs ``tau``), STFT."""
    if n < 1:
        raise ValueError("n must be >= 1")
    eye = np.eye(n)
    zero = np.zeros((n, n))
    key = name.replace("_", "").replace("-", "").lower()
    if key == "j":
        return validate(jmat(n))
    if key in ("i2n", "i", "identity"):
        return validate(np.eye(2 * n))
    if key == "pi":
        return from_blocks(eye, eye, -eye / 2, eye / 2)
    if key in ("tauwigner", "tau"):
        if tau is None or not 0.0 < tau < 1.0:
            raise ValueError("TauWigner needs tau in (0, 1)")
        return from_blocks(eye, eye, -(1.0 - tau) * eye, tau * eye)
    if key == "stft":
        return from_blocks(eye, zero, -eye, eye)
    raise UnknownName(name)


def compose(m1: SymplecticMatrix, m2: SymplecticMatrix, tol: float = 1e-9) -> SymplecticMatrix:
    if m1.n != m2.n:
        raise DimensionMismatch(f"half-dimensions differ: {m1.n} vs {m2.n}")
    return validate(m1.entries @ m2.entries, tol)


def inverse(m: SymplecticMatrix, tol: float = 1e-9) -> SymplecticMatrix:
    # M^{-1} = -J M^T J = [[D^T, -B^T], [-C^T, A^T]]
    return from_blocks(m.D.T, -m.B.T, -m.C.T, m.A.T, tol)


def param_count(n: int) -> int:
    return n * (2 * n + 1)


def hamiltonian(params, n: int) -> np.ndarray:
    """H = X J with X symmetric, X filled row-major from its upper triangle."""
    p = np.asarray(params, dtype=float).ravel()
    if p.size != param_count(n):
        raise ValueError(f"expected {param_count(n)} params for n={n}, got {p.size}")
    x = np.zeros((2 * n, 2 * n))
    iu = np.triu_indices(2 * n)
    x[iu] = p
    x = x + np.triu(x, 1).T
    return x @ jmat(n)


def exp_param(params, n: int = 1) -> SymplecticMatrix:
    h = hamiltonian(params, n)
    if not np.all(np.isfinite(h)) or np.linalg.norm(h) > PARAM_NORM_CAP:
        raise SymplecticOverflow(f"Hamiltonian norm exceeds cap {PARAM_NORM_CAP}")
    # scipy's expm is a scaling-and-squaring Pade scheme
    m = expm(h)
    scale = max(1.0, float(np.max(np.abs(m))))
    return validate(m, tol=1e-8 * scale**2)


def log_param(m: SymplecticMatrix) -> np.ndarray:
    """Chart coordinates p with exp_param(p) == m (identity component only)."""
    h = logm(m.entries)
    if np.max(np.abs(np.imag(h))) > 1e-8:
        raise ValueError("matrix has no real logarithm")
    h = np.real(h)
    x = -h @ jmat(m.n)  # H = X J  =>  X = -H J
    if np.max(np.abs(x - x.T)) > 1e-6:
        raise ValueError("logarithm is not Hamiltonian")
    x = (x + x.T) / 2
    return x[np.triu_indices(2 * m.n)].copy()


def random_symplectic(rng: np.random.Generator, n: int = 1, scale: float = 1.0) -> SymplecticMatrix:
    return exp_param(scale * rng.standard_normal(param_count(n)), n)


# -- file format ---------------------------------------------------------------

def _parse_entry(v) -> float:
    if isinstance(v, str):
        return float(Fraction(v.strip()))
    return float(v)


def from_json_obj(obj: dict, tol: float = DEFAULT_TOL) -> SymplecticMatrix:
    rows = [[_parse_entry(v) for v in row] for row in obj["rows"]]
    m = validate(rows, tol)
    if "n" in obj and int(obj["n"]) != m.n:
        raise DimensionMismatch(f"declared n={obj['n']} but rows give n={m.n}")
    return m


def to_json_obj(m: SymplecticMatrix) -> dict:
    return {"n": m.n, "rows": [[float(v) for v in row] for row in m.entries]}


def load(path, tol: float = DEFAULT_TOL) -> SymplecticMatrix:
    with open(path, encoding="utf-8") as fh:
        return from_json_obj(json.load(fh), tol)


def save(m: SymplecticMatrix, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_json_obj(m), fh, indent=2)
        fh.write("\n")
