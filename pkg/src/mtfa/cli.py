"""Command line entry point ``mtfa``.

Exit status: 0 on success, 2 when an input fails validation, 3 when the
numerics break down (singular quotients, overflow, degenerate anchors).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
import warnings

import numpy as np

from . import bench, properties, signals, symplectic as sp, tfd
from .metaplectic import mt
from .wigner import DegenerateAnchor, GridTooCoarse, IllConditionedQuotient

log = logging.getLogger("mtfa")

NUMERICAL = (ArithmeticError, np.linalg.LinAlgError, DegenerateAnchor, IllConditionedQuotient,
             GridTooCoarse)
VALIDATION = (ValueError, KeyError, TypeError, OSError, json.JSONDecodeError)


def _bench(a) -> int:
    methods = tuple(m.strip() for m in a.methods.split(",")) if a.methods else bench.METHODS
    snrs = bench.parse_snr_spec(a.snr)
    t0 = time.perf_counter()
    recs = bench.run_example(a.example, snrs, a.trials, a.seed, methods)
    bench.emit(recs, a.out, a.svg)
    log.info("benchmark finished in %.1f s", time.perf_counter() - t0)
    return 0


def _transform(a) -> int:
    m = sp.load(a.matrix)
    f = signals.read_csv(a.input)
    out = mt(f, m, "auto" if a.method is None else a.method)
    signals.write_csv(out, a.out)
    return 0


def _cmcd(a) -> int:
    from .cohen import CMCDConfig, cmcd

    with open(a.config, encoding="utf-8") as fh:
        cfg = CMCDConfig.from_json_obj(json.load(fh))
    f = signals.read_csv(a.input)
    C = cmcd(f, cfg, path=a.path)
    if a.out.endswith(".bin"):
        tfd.write_binary(C, a.out)
    else:
        tfd.write_csv(C, a.out)
    return 0


def _denoise(a) -> int:
    from .lsfilter import denoise

    ex = bench.example(a.example)
    ref = signals.generate(ex.kind, ex.grid)
    g = signals.add_awgn(ref, a.snr, a.seed, a.stream)
    est, diag = denoise(g, ref, bench.pipeline_for(a.method, ex), a.eps)
    signals.write_csv(est, a.out)
    if a.report:
        obj = diag.to_json_obj()
        obj.update({"example": a.example, "method": a.method, "snr_db": a.snr, "seed": a.seed,
                    "stream": a.stream})
        with open(a.report, "w", encoding="utf-8") as fh:
            json.dump(obj, fh, indent=2)
            fh.write("\n")
    return 0


def _properties(a) -> int:
    ids = properties.IDS if a.ids == "all" else tuple(s.strip() for s in a.ids.split(","))
    unknown = [i for i in ids if i not in properties.IDS]
    if unknown:
        raise ValueError(f"unknown property ids: {', '.join(unknown)}")
    rows = properties.run_suite(ids, range(a.seeds), form=a.form)
    properties.write_suite(rows, a.out)
    bad = [r for r in rows if not r.passed]
    print(f"{len(rows) - len(bad)}/{len(rows)} checks within tolerance ({a.form} form)")
    for r in bad:
        print(f"  over tolerance: {r.property} seed={r.seed} signal={r.signal} residual={r.residual:.3e}")
    return 0


def _optimize(a) -> int:
    from .optimizer import Scenario, optimize

    sc = Scenario.load(a.scenario)
    with warnings.catch_warnings():
        warnings.simplefilter("always")
        res = optimize(sc, a.budget, a.restarts, a.seed, coset=a.coset)
    res.write_matrices(a.out)
    if a.trace:
        res.write_trace(a.trace)
    print(f"objective {res.initial_objective:.6g} -> {res.objective:.6g} after {res.evaluations} evaluations"
          + (" (budget exhausted)" if res.budget_exhausted else ""))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mtfa", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="denoising benchmark for one example")
    b.add_argument("--example", type=int, required=True, choices=(1, 2, 3))
    b.add_argument("--snr", default="-4:6:2")
    b.add_argument("--trials", type=int, default=50)
    b.add_argument("--seed", type=int, default=bench.DEFAULT_SEED)
    b.add_argument("--methods", default="")
    b.add_argument("--out", required=True)
    b.add_argument("--svg")
    b.set_defaults(run=_bench)

    t = sub.add_parser("transform", help="metaplectic transform of a signal file")
    t.add_argument("--matrix", required=True)
    t.add_argument("--in", dest="input", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--method", choices=("direct", "chirpfft"))
    t.set_defaults(run=_transform)

    c = sub.add_parser("cmcd", help="CMCD of a signal file")
    c.add_argument("--config", required=True)
    c.add_argument("--in", dest="input", required=True)
    c.add_argument("--out", required=True, help="CSV, or the binary layout when the name ends in .bin")
    c.add_argument("--path", choices=("direct", "spectral"), default="direct")
    c.set_defaults(run=_cmcd)

    d = sub.add_parser("denoise", help="denoise one noisy realisation of an example signal")
    d.add_argument("--example", type=int, required=True, choices=(1, 2, 3))
    d.add_argument("--snr", type=float, required=True)
    d.add_argument("--seed", type=int, default=bench.DEFAULT_SEED)
    d.add_argument("--stream", type=int, default=0)
    d.add_argument("--method", default="adaptive-cmcd",
                   choices=[m for m in bench.METHODS if m.startswith("adaptive")])
    d.add_argument("--eps", type=float, default=1e-3)
    d.add_argument("--out", required=True)
    d.add_argument("--report")
    d.set_defaults(run=_denoise)

    pr = sub.add_parser("properties", help="run the property suite")
    pr.add_argument("--ids", default="all")
    pr.add_argument("--seeds", type=int, default=5)
    pr.add_argument("--form", choices=("nominal", "corrected"), default="nominal")
    pr.add_argument("--out", required=True)
    pr.set_defaults(run=_properties)

    o = sub.add_parser("optimize", help="search the symplectic matrices of a denoising scenario")
    o.add_argument("--scenario", required=True)
    o.add_argument("--budget", type=int, required=True)
    o.add_argument("--restarts", type=int, default=1)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--coset", action="store_true", help="add a restart from the J coset")
    o.add_argument("--out", required=True)
    o.add_argument("--trace")
    o.set_defaults(run=_optimize)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return a.run(a)
    except NUMERICAL as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except VALIDATION as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
