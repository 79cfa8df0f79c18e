"""Cohen kernels, the classical Cohen integral, and the convolution-type CMCD."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import gmconv
from . import symplectic as sp
from .gmconv import GMCMatrices
from .signals import SampledSignal, UniformGrid
from .tfd import TFDistribution
from .wigner import MWDConfig, TFGrids, mwd, tf_grids

KINDS = ("Wigner", "ChoiWilliams", "KirkwoodRihaczek", "BornJordan", "ZhaoAtlasMarks",
         "MargenauHill", "Page", "Delta", "CustomPhi")
ORACLE_COST_CAP = 2.5e8


class GridTooLarge(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class KernelSpec:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        p = self.params
        if self.kind == "ChoiWilliams" and not p.get("sigma", 1.0) > 0:
            raise ValueError("Choi-Williams needs sigma > 0")
        if self.kind == "ZhaoAtlasMarks" and not p.get("kappa", 0.5) > 0:
            raise ValueError("ZAM needs kappa > 0")
        if self.kind == "CustomPhi":
            vals = np.asarray(p["values"], dtype=complex)
            if not np.all(np.isfinite(vals)):
                raise ValueError("custom kernel values must be finite")

    def to_json_obj(self) -> dict:
        params = dict(self.params)
        if self.kind == "CustomPhi":
            vals = np.asarray(params["values"], dtype=complex)
            params["values"] = {"re": vals.real.tolist(), "im": vals.imag.tolist()}
        return {"kind": self.kind, "params": params}

    @classmethod
    def from_json_obj(cls, obj: dict) -> "KernelSpec":
        params = dict(obj.get("params", {}))
        if obj["kind"] == "CustomPhi":
            v = params["values"]
            params["values"] = np.asarray(v["re"]) + 1j * np.asarray(v["im"]) if isinstance(v, dict) else np.asarray(v)
        return cls(obj["kind"], params)

    def dumps(self) -> str:
        return json.dumps(self.to_json_obj())


def _zam_window(name: str):
    if name in (None, "ones", "rect"):
        return lambda z: np.ones_like(z)
    if name == "gauss":
        return lambda z: np.exp(-np.pi * z**2)
    raise ValueError(f"unknown ZAM window {name!r}")


def phi_eval(spec: KernelSpec, v, z):
    v = np.asarray(v, dtype=float)
    z = np.asarray(z, dtype=float)
    vz = v * z
    k = spec.kind
    if k in ("Wigner", "Delta"):
        return np.ones(np.broadcast(v, z).shape, dtype=complex)
    if k == "ChoiWilliams":
        return np.exp(-(vz**2) / spec.params.get("sigma", 1.0)).astype(complex)
    if k == "KirkwoodRihaczek":
        return np.exp(1j * np.pi * vz)
    if k == "BornJordan":
        return np.sinc(vz).astype(complex)
    if k == "ZhaoAtlasMarks":
        kappa = spec.params.get("kappa", 0.5)
        g = _zam_window(spec.params.get("window"))
        # sin(2 pi kappa vz) / (2 pi kappa vz) = sinc(2 kappa vz)
        return (g(z) * np.abs(z) * np.sinc(2 * kappa * vz)).astype(complex)
    if k == "MargenauHill":
        return np.cos(np.pi * vz).astype(complex)
    if k == "Page":
        return np.exp(2j * np.pi * v * np.abs(z))
    raise ValueError(f"phi_eval does not apply to {k}")


def kernel_grids(W_or_grids, scale: int = 2) -> tuple[UniformGrid, UniformGrid]:
    """Symmetric grids with the steps of a distribution, covering all its lags."""
    xg, ug = W_or_grids.grids if isinstance(W_or_grids, TFDistribution) else W_or_grids
    return (UniformGrid.symmetric(scale * xg.count - 1, xg.step),
            UniformGrid.symmetric(scale * ug.count - 1, ug.step))


def _dft_matrix(out_pts, in_pts, step, sign):
    return np.exp(sign * 2j * np.pi * np.outer(out_pts, in_pts)) * step


def phi_to_Pi(spec: KernelSpec, xgrid: UniformGrid, ugrid: UniformGrid) -> TFDistribution:
    """Pi(x, w) = sum_v sum_z phi(v, z) exp(-2 pi i (v x + z w)) dv dz on the conjugate grids."""
    if not (xgrid.contains_zero and ugrid.contains_zero):
        raise ValueError("kernel grids must contain the origin")
    if spec.kind == "Delta":
        vals = np.zeros((xgrid.count, ugrid.count), dtype=complex)
        vals[xgrid.zero_index(), ugrid.zero_index()] = 1.0 / (xgrid.step * ugrid.step)
        return TFDistribution(xgrid, ugrid, vals)
    vg, zg = xgrid.conjugate(), ugrid.conjugate()
    if spec.kind == "CustomPhi":
        phi = np.asarray(spec.params["values"], dtype=complex)
        if phi.shape != (vg.count, zg.count):
            raise ValueError(f"custom kernel needs shape {(vg.count, zg.count)}")
    else:
        v, z = np.meshgrid(vg.points, zg.points, indexing="ij")
        phi = phi_eval(spec, v, z)
    ev = _dft_matrix(xgrid.points, vg.points, vg.step, -1)
    ez = _dft_matrix(ugrid.points, zg.points, zg.step, -1)
    return TFDistribution(xgrid, ugrid, ev @ phi @ ez.T)


def Pi_to_phi(Pi: TFDistribution) -> np.ndarray:
    """Inverse of phi_to_Pi on the conjugate grids."""
    vg, zg = Pi.xgrid.conjugate(), Pi.ugrid.conjugate()
    ev = _dft_matrix(vg.points, Pi.xgrid.points, Pi.xgrid.step, 1)
    ez = _dft_matrix(zg.points, Pi.ugrid.points, Pi.ugrid.step, 1)
    return ev @ Pi.values @ ez.T


def classical_cohen_oracle(f, spec: KernelSpec, xgrid: UniformGrid, ugrid: UniformGrid,
                           quad: tuple[UniformGrid, UniformGrid, UniformGrid] | None = None) -> TFDistribution:
    """Brute-force triple quadrature of the classical Cohen integral form.

    ``f`` is a callable or a SampledSignal (linearly interpolated).  ``quad``
    gives the (y, z, v) integration grids; by default y follows ``xgrid``, the
    lag grid z steps by 2*dx and v is conjugate to y.
    """
    if isinstance(f, SampledSignal):
        sig = f

        def f(t):
            return np.interp(t, sig.t, sig.values.real, 0, 0) + 1j * np.interp(t, sig.t, sig.values.imag, 0, 0)
    if quad is None:
        n = xgrid.count | 1
        yg = UniformGrid.symmetric(n, xgrid.step)
        zg = UniformGrid.symmetric(n, 2 * xgrid.step)
        vg = yg.conjugate()
    else:
        yg, zg, vg = quad
    cost = xgrid.count * ugrid.count * vg.count * zg.count + vg.count * zg.count * yg.count
    if cost > ORACLE_COST_CAP or max(xgrid.count, ugrid.count) > 65:
        raise GridTooLarge("classical Cohen oracle is limited to 64 x 64 outputs")
    y, z, v = yg.points, zg.points, vg.points
    # ambiguity-type inner integral over y for every (v, z)
    prod = f(y[None, :] + z[:, None] / 2) * np.conj(f(y[None, :] - z[:, None] / 2))  # (z, y)
    amb = np.exp(2j * np.pi * np.outer(v, y)) @ prod.T * yg.step  # (v, z)
    vv, zz = np.meshgrid(v, z, indexing="ij")
    a = amb * phi_eval(spec, vv, zz) if spec.kind != "Delta" else amb
    ex = np.exp(-2j * np.pi * np.outer(xgrid.points, v)) * vg.step  # (x, v)
    ew = np.exp(-2j * np.pi * np.outer(ugrid.points, z)) * zg.step  # (w, z)
    return TFDistribution(xgrid, ugrid, ex @ a @ ew.T)


# -- CMCD ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CMCDConfig:
    mwd: MWDConfig
    gmc: GMCMatrices
    kernel: KernelSpec | TFDistribution

    @classmethod
    def classical(cls, kernel) -> "CMCDConfig":
        return cls(MWDConfig.classical(), GMCMatrices.classical(), kernel)

    @classmethod
    def from_json_obj(cls, obj: dict) -> "CMCDConfig":
        """``{"mwd": {"M": m, "M1": ..., "M3": ...}, "gmc": {"M4": ..., "M6": ...}, "kernel": spec}``.

        Missing matrices default to the classical ones; ``"gmc": {"tied": m}``
        sets M4 = M5 = M6.  Matrices use the symplectic JSON format.
        """
        base = MWDConfig.classical()
        mw = obj.get("mwd", {})
        mwd_cfg = MWDConfig(*(sp.from_json_obj(mw[k]) if k in mw else getattr(base, k)
                              for k in ("M", "M1", "M2", "M3")))
        g = obj.get("gmc", {})
        if "tied" in g:
            gmc = GMCMatrices.tied(sp.from_json_obj(g["tied"]))
        else:
            j = GMCMatrices.classical()
            gmc = GMCMatrices(*(sp.from_json_obj(g[k]) if k in g else getattr(j, k) for k in ("M4", "M5", "M6")))
        if "kernel" not in obj:
            raise ValueError("configuration needs a kernel")
        return cls(mwd_cfg, gmc, KernelSpec.from_json_obj(obj["kernel"]))


def classify(cfg: CMCDConfig) -> str:
    """Special-case label of a configuration (labels follow the CMCD family table)."""
    delta = isinstance(cfg.kernel, KernelSpec) and cfg.kernel.kind == "Delta"
    fam = cfg.gmc.family()
    classical_mwd = cfg.mwd.is_classical()
    if delta and cfg.gmc.M4 == cfg.gmc.M6:
        return "mwd"
    if fam == "conventional":
        return "cohen" if classical_mwd else "mwd-cd"
    if classical_mwd:
        return "gmc-cd"
    return {"I-type": "I-type", "II-type": "II-type", "IV-type": "IV-type"}.get(fam, "cmcd")


def kernel_field(cfg_kernel, W: TFDistribution) -> TFDistribution:
    if isinstance(cfg_kernel, TFDistribution):
        return cfg_kernel
    return phi_to_Pi(cfg_kernel, *kernel_grids(W))


def _embed(W: TFDistribution, grids) -> TFDistribution:
    """Zero-extend W onto ``grids`` (same steps, aligned lattice)."""
    out = np.zeros((grids[0].count, grids[1].count), dtype=complex)
    i0 = int(round((W.xgrid.start - grids[0].start) / W.xgrid.step))
    i1 = int(round((W.ugrid.start - grids[1].start) / W.ugrid.step))
    if i0 < 0 or i1 < 0 or i0 + W.xgrid.count > grids[0].count or i1 + W.ugrid.count > grids[1].count:
        raise ValueError("embedding grid does not cover the distribution")
    out[i0:i0 + W.xgrid.count, i1:i1 + W.ugrid.count] = W.values
    return TFDistribution(grids[0], grids[1], out), (i0, i1)


def cmcd(f: SampledSignal, cfg: CMCDConfig, grids: TFGrids | None = None, path: str = "direct",
         fast: bool = True) -> TFDistribution:
    """CMCD of ``f``: the MWD convolved with the kernel in the generalized sense.

    ``fast`` routes the labelled special cases to their reduced computations.
    """
    grids = grids or tf_grids(f.grid)
    W = mwd(f, cfg.mwd, grids)
    label = classify(cfg) if fast else "cmcd"
    if label == "mwd" and path == "direct":
        return W
    Pi = kernel_field(cfg.kernel, W)
    if path == "spectral":
        # a common grid large enough for both operands
        xs = max(Pi.xgrid.count, 2 * W.xgrid.count + 1) | 1
        us = max(Pi.ugrid.count, 2 * W.ugrid.count + 1) | 1
        common = (UniformGrid.symmetric(xs, W.xgrid.step), UniformGrid.symmetric(us, W.ugrid.step))
        We, (i0, i1) = _embed(W, common)
        Pe, _ = _embed(Pi, common)
        C = gmconv.convolve_spectral(We, Pe, cfg.gmc)
        return W.with_values(C.values[i0:i0 + W.xgrid.count, i1:i1 + W.ugrid.count])
    if label in ("cohen", "mwd-cd"):
        return W.with_values(gmconv.linear_convolve(W.values, W.grids, Pi.values, Pi.grids))
    return gmconv.convolve_direct(W, Pi, cfg.gmc)
