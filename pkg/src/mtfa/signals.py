"""Uniform grids, the three benchmark signals, complex AWGN and error metrics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np


class ZeroSignal(ValueError):
    pass


class GridMismatch(ValueError):
    pass


@dataclass(frozen=True)
class UniformGrid:
    start: float
    step: float
    count: int

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("grid step must be positive")
        if self.count < 1:
            raise ValueError("grid count must be positive")

    @classmethod
    def symmetric(cls, count: int, step: float) -> "UniformGrid":
        """Grid of ``count`` points containing 0; centred for odd counts."""
        return cls(-(count // 2) * step, step, count)

    @classmethod
    def from_interval(cls, a: float, b: float, fs: float) -> "UniformGrid":
        count = int(round((b - a) * fs))
        return cls(a, 1.0 / fs, count)

    @property
    def points(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.count)

    @property
    def stop(self) -> float:
        return self.start + self.step * (self.count - 1)

    def zero_index(self) -> int | None:
        k = -self.start / self.step
        ki = int(round(k))
        if abs(k - ki) > 1e-9 or not 0 <= ki < self.count:
            return None
        return ki

    @property
    def contains_zero(self) -> bool:
        return self.zero_index() is not None

    def conjugate(self, scale: float = 1.0) -> "UniformGrid":
        """FFT-conjugate grid (spacing 1/(count*step)), optionally scaled by ``scale``.

        A negative scale flips orientation; the returned grid is ascending.
        """
        n = self.count
        d = 1.0 / (n * self.step)
        k0 = -(n // 2)
        if scale >= 0:
            return UniformGrid(k0 * d * scale, d * scale, n)
        top = k0 + n - 1
        return UniformGrid(top * d * scale, -d * scale, n)

    def same_as(self, other: "UniformGrid", rtol: float = 1e-9) -> bool:
        return (
            self.count == other.count
            and math.isclose(self.step, other.step, rel_tol=rtol)
            and abs(self.start - other.start) <= rtol * max(1.0, abs(self.start)) + 1e-12 * self.step
        )


@dataclass(frozen=True, eq=False)
class SampledSignal:
    grid: UniformGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid.count,):
            raise ValueError(f"expected {self.grid.count} samples, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("signal contains non-finite samples")
        object.__setattr__(self, "values", v)

    @property
    def t(self) -> np.ndarray:
        return self.grid.points

    def energy(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2) * self.grid.step)

    def power(self) -> float:
        return float(np.mean(np.abs(self.values) ** 2))


def lfm(x):
    return np.exp(2j * np.pi * (x + x**2 / 2))


def gauss_lfm(x):
    return np.exp(-((x + 1) ** 2) / 8) * np.exp(2j * np.pi * x**2)


def cexp(x):
    return np.exp(1j * np.pi * x)


GENERATORS = {"LFM": lfm, "GaussLFM": gauss_lfm, "CExp": cexp}


def generate(kind: str, grid: UniformGrid) -> SampledSignal:
    try:
        fn = GENERATORS[kind]
    except KeyError:
        raise ValueError(f"unknown signal kind {kind!r}; choose from {sorted(GENERATORS)}") from None
    return SampledSignal(grid, fn(grid.points))


def rng_for(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator: the (seed, stream) pair fully fixes the draws."""
    return np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), stream & (2**64 - 1)]))


def add_awgn(f: SampledSignal, snr_db: float, seed: int, stream: int = 0) -> SampledSignal:
    """Add circular complex white noise at ``snr_db`` (mean-power definition).

    ``snr_db = +inf`` returns ``f`` unchanged and ``-inf`` returns noise alone,
    at the power of ``f``.
    """
    pf = f.power()
    if pf == 0.0:
        raise ZeroSignal("cannot set an SNR relative to a zero signal")
    if snr_db == math.inf:
        return f
    rng = rng_for(seed, stream)
    z = rng.standard_normal((2, f.grid.count))
    noise = (z[0] + 1j * z[1]) / math.sqrt(2.0)
    if snr_db == -math.inf:
        return SampledSignal(f.grid, math.sqrt(pf) * noise)
    sigma = math.sqrt(pf / 10.0 ** (snr_db / 10.0))
    return SampledSignal(f.grid, f.values + sigma * noise)


@dataclass(frozen=True)
class Metrics:
    mse: float
    psnr: float

    @property
    def log10_mse(self) -> float:
        return math.log10(self.mse) if self.mse > 0 else -math.inf


def _psnr(est: np.ndarray, ref: np.ndarray) -> float:
    err = float(np.mean((est - ref) ** 2))
    peak = float(np.max(np.abs(ref)))
    if err == 0.0:
        return math.inf
    if peak == 0.0:
        # a reference part that is identically zero has no peak; use unit peak
        peak = 1.0
    return 10.0 * math.log10(peak**2 / err)


def metrics(estimate: SampledSignal, reference: SampledSignal) -> Metrics:
    if not estimate.grid.same_as(reference.grid):
        raise GridMismatch("estimate and reference live on different grids")
    e, r = estimate.values, reference.values
    mse = float(np.mean(np.abs(e - r) ** 2))
    pr = _psnr(e.real, r.real)
    pi = _psnr(e.imag, r.imag)
    psnr = math.inf if (pr == math.inf and pi == math.inf) else (pr + pi) / 2
    return Metrics(mse, psnr)


def align_phase(estimate: SampledSignal, reference: SampledSignal) -> SampledSignal:
    """Rotate ``estimate`` by the unimodular constant that best matches ``reference``."""
    ip = np.vdot(estimate.values, reference.values)
    if abs(ip) == 0.0:
        return estimate
    return SampledSignal(estimate.grid, estimate.values * (ip / abs(ip)))


def read_csv(path) -> SampledSignal:
    t, v = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"t", "re", "im"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"signal CSV lacks columns {sorted(missing)}")
        for row in reader:
            t.append(float(row["t"]))
            v.append(complex(float(row["re"]), float(row["im"])))
    t = np.asarray(t)
    if t.size < 2:
        raise ValueError("signal CSV needs at least two samples")
    step = (t[-1] - t[0]) / (t.size - 1)
    if step <= 0 or np.max(np.abs(np.diff(t) - step)) > 1e-6 * step:
        raise ValueError("signal CSV times are not uniformly spaced")
    return SampledSignal(UniformGrid(float(t[0]), float(step), t.size), np.asarray(v))


def write_csv(sig: SampledSignal, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "re", "im"])
        for t, v in zip(sig.t, sig.values):
            w.writerow([repr(float(t)), repr(float(v.real)), repr(float(v.imag))])
