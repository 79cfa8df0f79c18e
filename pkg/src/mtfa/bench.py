"""Denoising benchmark: three example configurations, nine methods, SNR sweeps."""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import fft as sfft

from .cohen import KernelSpec, kernel_field
from .gmconv import GMCMatrices, LinearConvolver
from .lsfilter import DEFAULT_EPS, PipelineConfig, denoise
from .tfd import TFDistribution
from .signals import SampledSignal, UniformGrid, add_awgn, align_phase, generate, metrics
from .symplectic import SymplecticMatrix, validate
from .wigner import MWDConfig, TFGrids, tf_grids, wd_invert, wigner

METHODS = ("margenau-hill", "kirkwood-rihaczek", "born-jordan", "page", "wiener",
           "adaptive-cd", "adaptive-mwd-cd", "adaptive-gmc-cd", "adaptive-cmcd")
FIXED_KERNELS = {"margenau-hill": "MargenauHill", "kirkwood-rihaczek": "KirkwoodRihaczek",
                 "born-jordan": "BornJordan", "page": "Page"}
DEFAULT_SNRS = (-4.0, -2.0, 0.0, 2.0, 4.0, 6.0)
DEFAULT_SEED = 20240601
CSV_HEADER = ("example", "method", "snr_db", "trials", "log10_mse", "psnr_db", "seed")


class UnknownMethod(ValueError):
    pass


def _m(rows) -> SymplecticMatrix:
    return validate(np.array([[float(Fraction(v)) for v in r] for r in rows]), tol=1e-12)


@dataclass(frozen=True)
class ExampleConfig:
    id: int
    kind: str
    fs: float
    interval: tuple[float, float]
    mwd: MWDConfig
    gmc: GMCMatrices

    @property
    def grid(self) -> UniformGrid:
        return UniformGrid.from_interval(self.interval[0], self.interval[1], self.fs)

    def matrices(self) -> dict[str, SymplecticMatrix]:
        return {"M": self.mwd.M, "M1": self.mwd.M1, "M2": self.mwd.M2, "M3": self.mwd.M3,
                "M4": self.gmc.M4, "M5": self.gmc.M5, "M6": self.gmc.M6}


def example(eid: int) -> ExampleConfig:
    m3 = _m([[1, 1], ["-1/2", "1/2"]])
    if eid == 1:
        m, m1 = _m([[0, 1], [-1, 0]]), _m([[0, 1], [-1, 2]])
        m4 = _m([[-5, 0, 1, 0], [0, 5, 0, 1], [0, 0, "-1/5", 0], [0, 0, 0, "1/5"]])
        kind, fs = "LFM", 30.0
    elif eid == 2:
        m, m1 = _m([[0, 1], [-1, 0]]), _m([[0, 1], [-1, "5/2"]])
        m4 = _m([[1, 0, 4, 0], [0, 1, 0, 1], [1, 0, 5, 0], [0, 1, 0, 2]])
        kind, fs = "GaussLFM", 50.0
    elif eid == 3:
        m, m1 = _m([[0, "10/21"], ["-21/10", "10/7"]]), _m([[0, 1], [-1, 0]])
        m4 = _m([[0, 0, 1, 0], [0, 3, 0, -2], [-1, 0, 2, 0], [0, -1, 0, 1]])
        kind, fs = "CExp", 50.0
    else:
        raise ValueError(f"example id must be 1, 2 or 3, got {eid}")
    return ExampleConfig(eid, kind, fs, (-5.0, 5.0), MWDConfig(m, m1, m1, m3), GMCMatrices.tied(m4))


@dataclass(frozen=True)
class BenchmarkRecord:
    example: int
    method: str
    snr_db: float
    trials: int
    log10_mse: float
    psnr_db: float
    seed: int

    def row(self) -> list[str]:
        return [str(self.example), self.method, repr(float(self.snr_db)), str(self.trials),
                repr(float(self.log10_mse)), repr(float(self.psnr_db)), str(self.seed)]


def pipeline_for(method: str, ex: ExampleConfig) -> PipelineConfig:
    classical = PipelineConfig.classical()
    if method == "adaptive-cd":
        return classical
    if method == "adaptive-mwd-cd":
        return PipelineConfig(ex.mwd, classical.gmc)
    if method == "adaptive-gmc-cd":
        return PipelineConfig(classical.mwd, ex.gmc)
    if method == "adaptive-cmcd":
        return PipelineConfig(ex.mwd, ex.gmc)
    raise UnknownMethod(method)


def wiener_baseline(g: SampledSignal, s_ff: np.ndarray, s_nn: np.ndarray) -> SampledSignal:
    """Frequency-domain Wiener gain S_ff / (S_ff + S_nn); bins where both vanish pass through."""
    if not np.any(s_nn):
        return g
    tot = s_ff + s_nn
    gain = np.divide(s_ff, tot, out=np.ones_like(tot), where=tot > 0)
    return SampledSignal(g.grid, sfft.ifft(sfft.fft(g.values) * gain))


def noise_sigma2(reference: SampledSignal, snr_db: float) -> float:
    if snr_db == math.inf:
        return 0.0
    if snr_db == -math.inf:
        return reference.power()
    return reference.power() / 10.0 ** (snr_db / 10.0)


@dataclass
class TrialContext:
    """Per-reference quantities shared by every trial and method."""

    ex: ExampleConfig
    reference: SampledSignal
    grids: TFGrids
    W_target: object
    kernels: dict

    @classmethod
    def build(cls, ex: ExampleConfig) -> "TrialContext":
        ref = generate(ex.kind, ex.grid)
        grids = tf_grids(ref.grid)
        W = wigner(ref, grids)
        return cls(ex, ref, grids, W, {})

    def smoother(self, name: str) -> LinearConvolver:
        if name not in self.kernels:
            Pi = kernel_field(KernelSpec(FIXED_KERNELS[name]), self.W_target)
            self.kernels[name] = LinearConvolver(self.W_target.grids, Pi.values, Pi.grids)
        return self.kernels[name]


def baseline(method: str, g: SampledSignal, ctx: TrialContext, snr_db: float,
             eps: float = DEFAULT_EPS, W_g: TFDistribution | None = None) -> SampledSignal:
    """Estimate of the clean signal from ``g`` by one of the nine methods.

    ``W_g`` optionally passes in the precomputed classical WD of ``g``.
    """
    ref = ctx.reference
    if method in FIXED_KERNELS:
        W = W_g if W_g is not None else wigner(g, ctx.grids)
        Wh = W.with_values(ctx.smoother(method)(W.values))
        return align_phase(wd_invert(Wh, out_grid=g.grid), ref)
    if method == "wiener":
        s_ff = np.abs(sfft.fft(ref.values)) ** 2
        s_nn = np.full(g.grid.count, noise_sigma2(ref, snr_db) * g.grid.count)
        return wiener_baseline(g, s_ff, s_nn)
    if method.startswith("adaptive-"):
        est, _ = denoise(g, ref, pipeline_for(method, ctx.ex), eps, ctx.grids, ctx.W_target)
        return est
    raise UnknownMethod(method)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("MTFA_THREADS", "1")))
    except ValueError:
        return 1


def run_example(eid: int, snr_list=DEFAULT_SNRS, trials: int = 50, seed: int = DEFAULT_SEED,
                methods=METHODS, eps: float = DEFAULT_EPS, raw: dict | None = None) -> list[BenchmarkRecord]:
    """Mean log10 MSE and PSNR per (method, SNR).

    Trial k at SNR index s draws its noise from stream s * 100000 + k, so every
    method sees the same noisy observation.  ``raw`` (optional dict) receives
    the per-trial (mse, psnr) lists.
    """
    for m in methods:
        if m not in METHODS:
            raise UnknownMethod(m)
    ex = example(eid)
    ctx = TrialContext.build(ex)

    def one(args):
        si, snr, k = args
        g = add_awgn(ctx.reference, snr, seed, si * 100000 + k)
        W_g = wigner(g, ctx.grids) if any(m in FIXED_KERNELS for m in methods) else None
        out = {}
        for m in methods:
            out[m] = metrics(baseline(m, g, ctx, snr, eps, W_g), ctx.reference)
        return si, out

    jobs = [(si, snr, k) for si, snr in enumerate(snr_list) for k in range(trials)]
    # warm the kernel cache before any concurrent use
    for m in methods:
        if m in FIXED_KERNELS:
            ctx.smoother(m)
    nthreads = _threads()
    if nthreads > 1:
        with ThreadPoolExecutor(nthreads) as pool:
            results = list(pool.map(one, jobs))
    else:
        results = [one(j) for j in jobs]
    records = []
    for si, snr in enumerate(snr_list):
        for m in methods:
            ms = [r[m] for i, r in results if i == si]
            mse = np.array([x.mse for x in ms])
            psnr = np.array([x.psnr for x in ms])
            with np.errstate(divide="ignore"):
                lm = float(np.mean(np.log10(mse)))
            records.append(BenchmarkRecord(eid, m, float(snr), trials, lm, float(np.mean(psnr)), seed))
            if raw is not None:
                raw[(m, float(snr))] = (mse, psnr)
    return records


def write_records(records, path) -> None:
    if not records:
        raise ValueError("no records to write")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in records:
            w.writerow(r.row())


def read_records(path) -> list[BenchmarkRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [BenchmarkRecord(int(r["example"]), r["method"], float(r["snr_db"]), int(r["trials"]),
                                float(r["log10_mse"]), float(r["psnr_db"]), int(r["seed"]))
                for r in csv.DictReader(fh)]


def emit(records, out_csv, out_svg=None) -> None:
    write_records(records, out_csv)
    if out_svg is not None:
        from .plotting import benchmark_svg

        benchmark_svg(records, out_svg)


def parse_snr_spec(spec: str) -> list[float]:
    """Either a comma list ("-4,0,6") or a start:stop:step range, stop inclusive."""
    spec = spec.strip()
    if ":" in spec:
        a, b, s = (float(v) for v in spec.split(":"))
        if s <= 0:
            raise ValueError("SNR step must be positive")
        n = int(math.floor((b - a) / s + 1e-9)) + 1
        return [a + i * s for i in range(n)]
    return [float(v) for v in spec.split(",") if v.strip()]


