"""Derivative-free search over the seven matrices of the denoising pipeline.

Each free matrix is written as ``base @ exp_param(p)`` so that the zero
parameter vector reproduces the scenario's base configuration.  Matrices in
one tied group share their parameters.  The objective is the mean MSE of the
oracle adaptive filter over a fixed set of noisy trials (common random
numbers), so it is a deterministic function of the parameters.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize

from . import symplectic as sp
from .gmconv import GMCMatrices
from .lsfilter import DEFAULT_EPS, PipelineConfig, denoise
from .signals import UniformGrid, add_awgn, generate
from .symplectic import SymplecticMatrix, compose, exp_param, param_count
from .wigner import MWDConfig, tf_grids, wigner

log = logging.getLogger(__name__)

NAMES = ("M", "M1", "M2", "M3", "M4", "M5", "M6")
HALF_DIM = {"M": 1, "M1": 1, "M2": 1, "M3": 1, "M4": 2, "M5": 2, "M6": 2}


class BudgetExhausted(UserWarning):
    """The evaluation budget ran out before the simplex converged."""


class BudgetTooSmall(UserWarning):
    """Fewer than 20 evaluations per parameter were granted."""


def classical_base() -> dict[str, SymplecticMatrix]:
    cfg = PipelineConfig.classical()
    mw, gmc = cfg.mwd, cfg.gmc
    return {"M": mw.M, "M1": mw.M1, "M2": mw.M2, "M3": mw.M3, "M4": gmc.M4, "M5": gmc.M5, "M6": gmc.M6}


@dataclass(frozen=True, eq=False)
class Scenario:
    kind: str
    interval: tuple[float, float]
    fs: float
    snr_db: tuple[float, ...]
    trials: int
    seed: int
    eps: float = DEFAULT_EPS
    free: tuple[tuple[str, ...], ...] = (("M1",),)
    base: dict = field(default_factory=classical_base)
    objective_kind: str = "signal"

    def __post_init__(self):
        if not self.free or not all(self.free):
            raise ValueError("the free mask must name at least one matrix")
        seen = set()
        for group in self.free:
            for name in group:
                if name not in NAMES:
                    raise ValueError(f"unknown matrix name {name!r}")
                if name in seen:
                    raise ValueError(f"{name} appears in more than one free group")
                seen.add(name)
            dims = {HALF_DIM[n] for n in group}
            if len(dims) != 1:
                raise ValueError(f"tied group {group} mixes 2x2 and 4x4 matrices")
            if any(not self.base[n].allclose(self.base[group[0]], 1e-12) for n in group):
                raise ValueError(f"tied group {group} needs equal base matrices")
        for name in NAMES:
            sp.validate(self.base[name].entries, 1e-8)
        if self.trials < 1 or not self.snr_db:
            raise ValueError("need at least one trial and one SNR")
        if self.objective_kind not in ("signal", "wigner"):
            raise ValueError("objective_kind is 'signal' or 'wigner'")

    @property
    def grid(self) -> UniformGrid:
        return UniformGrid.from_interval(self.interval[0], self.interval[1], self.fs)

    @property
    def param_count(self) -> int:
        return sum(param_count(HALF_DIM[g[0]]) for g in self.free)

    @classmethod
    def for_example(cls, eid: int, free=(("M1", "M2"),), snr_db=(0.0,), trials: int = 3,
                    seed: int = 20240601, eps: float = DEFAULT_EPS) -> "Scenario":
        from .bench import example

        ex = example(eid)
        return cls(ex.kind, ex.interval, ex.fs, tuple(snr_db), trials, seed, eps,
                   tuple(tuple(g) for g in free), ex.matrices())

    # -- JSON ------------------------------------------------------------------

    def to_json_obj(self) -> dict:
        return {"kind": self.kind, "interval": list(self.interval), "fs": self.fs,
                "snr_db": list(self.snr_db), "trials": self.trials, "seed": self.seed, "eps": self.eps,
                "free": [list(g) for g in self.free], "objective": self.objective_kind,
                "base": {n: sp.to_json_obj(m) for n, m in self.base.items()}}

    @classmethod
    def from_json_obj(cls, obj: dict) -> "Scenario":
        """Build from JSON; ``"example": k`` fills signal, grid and base matrices."""
        free = tuple(tuple(g) if isinstance(g, list) else (g,) for g in obj.get("free", [["M1"]]))
        if "example" in obj:
            sc = cls.for_example(int(obj["example"]), free, tuple(obj.get("snr_db", [0.0])),
                                 int(obj.get("trials", 3)), int(obj.get("seed", 20240601)),
                                 float(obj.get("eps", DEFAULT_EPS)))
            base = dict(sc.base)
        else:
            sc = None
            base = classical_base()
        for n, m in obj.get("base", {}).items():
            if n not in NAMES:
                raise ValueError(f"unknown matrix name {n!r}")
            base[n] = sp.from_json_obj(m)
        kind = obj.get("kind", sc.kind if sc else None)
        if kind is None:
            raise ValueError("scenario needs a signal kind or an example id")
        grid = obj.get("grid", {})
        interval = tuple(obj.get("interval", grid.get("interval", sc.interval if sc else (-5.0, 5.0))))
        fs = float(obj.get("fs", grid.get("fs", sc.fs if sc else 50.0)))
        return cls(kind, (float(interval[0]), float(interval[1])), fs,
                   tuple(float(v) for v in obj.get("snr_db", [0.0])), int(obj.get("trials", 3)),
                   int(obj.get("seed", 20240601)), float(obj.get("eps", DEFAULT_EPS)), free, base,
                   obj.get("objective", "signal"))

    @classmethod
    def load(cls, path) -> "Scenario":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json_obj(json.load(fh))


def split_params(params, scenario: Scenario) -> list[np.ndarray]:
    p = np.asarray(params, dtype=float).ravel()
    if p.size != scenario.param_count:
        raise ValueError(f"expected {scenario.param_count} parameters, got {p.size}")
    out, i = [], 0
    for g in scenario.free:
        k = param_count(HALF_DIM[g[0]])
        out.append(p[i:i + k])
        i += k
    return out


def matrices(params, scenario: Scenario) -> dict[str, SymplecticMatrix]:
    mats = dict(scenario.base)
    for group, p in zip(scenario.free, split_params(params, scenario)):
        if not np.any(p):
            continue
        e = exp_param(p, HALF_DIM[group[0]])
        m = compose(scenario.base[group[0]], e, tol=1e-8 * max(1.0, float(np.abs(e.entries).max())) ** 2)
        for name in group:
            mats[name] = m
    return mats


def params_for(mats: dict, scenario: Scenario) -> np.ndarray:
    """Chart coordinates that reproduce ``mats`` for the free groups (inverse of ``matrices``)."""
    parts = []
    for g in scenario.free:
        rel = compose(sp.inverse(scenario.base[g[0]]), mats[g[0]], tol=1e-8)
        parts.append(sp.log_param(rel))
    return np.concatenate(parts)


@lru_cache(maxsize=8)
def _context(kind: str, interval: tuple, fs: float):
    grid = UniformGrid.from_interval(interval[0], interval[1], fs)
    ref = generate(kind, grid)
    grids = tf_grids(grid)
    return ref, grids, wigner(ref, grids)


@lru_cache(maxsize=8)
def _observations(kind: str, interval: tuple, fs: float, snrs: tuple, trials: int, seed: int):
    ref = _context(kind, interval, fs)[0]
    return tuple(add_awgn(ref, s, seed, si * 100000 + k) for si, s in enumerate(snrs) for k in range(trials))


PIPELINE_ERRORS = (ValueError, ArithmeticError, np.linalg.LinAlgError, OverflowError)


def objective(params, scenario: Scenario) -> float:
    """Mean MSE of the adaptive filter over the scenario's trials; +inf if the pipeline fails."""
    p = np.asarray(params, dtype=float)
    if not np.all(np.isfinite(p)):
        raise ValueError("parameters must be finite")
    try:
        mats = matrices(p, scenario)
        cfg = PipelineConfig(MWDConfig(mats["M"], mats["M1"], mats["M2"], mats["M3"]),
                             GMCMatrices(mats["M4"], mats["M5"], mats["M6"]))
        ref, grids, W_target = _context(scenario.kind, scenario.interval, scenario.fs)
        obs = _observations(scenario.kind, scenario.interval, scenario.fs, scenario.snr_db,
                            scenario.trials, scenario.seed)
        vals = []
        for g in obs:
            _, diag = denoise(g, ref, cfg, scenario.eps, grids, W_target)
            vals.append(diag.signal_mse if scenario.objective_kind == "signal" else diag.wigner_mse)
        out = float(np.mean(vals))
    except PIPELINE_ERRORS as exc:
        log.info("pipeline failure at params %s: %s", p.tolist(), exc)
        return math.inf
    return out if np.isfinite(out) else math.inf


@dataclass
class OptimizeResult:
    params: np.ndarray
    objective: float
    initial_objective: float
    trace: list = field(default_factory=list)  # (eval_index, objective, params)
    budget_exhausted: bool = False
    matrices: dict | None = None
    scenario: Scenario | None = None

    @property
    def evaluations(self) -> int:
        return len(self.trace)

    def best_so_far(self) -> np.ndarray:
        return np.minimum.accumulate(np.array([t[1] for t in self.trace]))

    def write_trace(self, path) -> None:
        n = len(self.params)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["eval_index", "objective"] + [f"p{i}" for i in range(n)])
            for i, val, p in self.trace:
                w.writerow([i, repr(float(val))] + [repr(float(v)) for v in p])

    def write_matrices(self, path) -> None:
        obj = {name: sp.to_json_obj(m) for name, m in (self.matrices or {}).items()}
        obj["objective"] = self.objective if np.isfinite(self.objective) else "inf"
        obj["budget_exhausted"] = self.budget_exhausted
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(obj, fh, indent=2)
            fh.write("\n")


class _Stop(Exception):
    pass


def with_coset(scenario: Scenario, left: SymplecticMatrix | str = "J") -> Scenario:
    """The same scenario with every free base matrix left-multiplied by ``left``.

    The exponential chart only reaches matrices near the base; starting a
    restart from the J coset covers points the identity coset misses.
    """
    base = dict(scenario.base)
    for g in scenario.free:
        n = HALF_DIM[g[0]]
        m = sp.special(left, n) if isinstance(left, str) else left
        moved = compose(m, scenario.base[g[0]])
        for name in g:
            base[name] = moved
    return replace(scenario, base=base)


def optimize(scenario: Scenario | None, budget: int, restarts: int = 1, seed: int = 0, fn=None,
             x0=None, perturb: float = 0.3, n_params: int | None = None,
             coset: bool = False) -> OptimizeResult:
    """Nelder-Mead from the zero chart point, then from random perturbations of it.

    ``fn`` replaces the pipeline objective (for example a test surrogate); then
    ``n_params`` gives the dimension when no scenario is passed.  The budget
    counts objective evaluations over all restarts.  With ``coset=True`` the
    last restart starts from the J coset of the base (see ``with_coset``); the
    result's ``scenario`` field names the chart its ``params`` belong to.
    """
    if budget < 1:
        raise ValueError("budget must allow at least one evaluation")
    if coset and (scenario is None or fn is not None):
        raise ValueError("coset restarts need a scenario-driven objective")
    if fn is None and scenario is None:
        raise ValueError("need a scenario or an objective function")
    charts = [scenario] * max(1, restarts)
    if coset:
        charts.append(with_coset(scenario))
    active = [0]

    def evaluate(p):
        if fn is not None:
            return fn(p)
        return objective(p, charts[active[0]])
    n = scenario.param_count if scenario is not None else int(n_params)
    if budget < 20 * n:
        warnings.warn(f"budget {budget} is below 20 evaluations per parameter ({20 * n})", BudgetTooSmall,
                      stacklevel=2)
    rng = np.random.default_rng(seed)
    start = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    trace: list = []
    best = [math.inf, start.copy(), 0]

    def counted(p):
        if len(trace) >= budget:
            raise _Stop
        v = float(evaluate(np.asarray(p, dtype=float)))
        if math.isnan(v):
            v = math.inf
        trace.append((len(trace), v, np.array(p, dtype=float)))
        if v < best[0]:
            best[0], best[1], best[2] = v, np.array(p, dtype=float), active[0]
        return v

    exhausted = False
    for r in range(len(charts)):
        active[0] = r
        if len(trace) >= budget:
            exhausted = True
            break
        x = start if r == 0 or (coset and r == len(charts) - 1) else start + perturb * rng.standard_normal(n)
        if budget - len(trace) == 1:
            counted(x)
            exhausted = r < len(charts) - 1
            continue
        try:
            res = minimize(counted, x, method="Nelder-Mead",
                           options={"maxfev": budget - len(trace), "xatol": 1e-5, "fatol": 1e-10,
                                    "adaptive": n > 4})
            if not res.success and len(trace) >= budget:
                exhausted = True
        except _Stop:
            exhausted = True
    if exhausted:
        warnings.warn("evaluation budget exhausted; returning the best point found", BudgetExhausted,
                      stacklevel=2)
    out = OptimizeResult(best[1], best[0], trace[0][1] if trace else math.inf, trace, exhausted)
    if scenario is not None:
        out.scenario = charts[best[2]]
        out.matrices = matrices(best[1], out.scenario)
        for m in out.matrices.values():
            sp.validate(m.entries, 1e-8)
    return out
