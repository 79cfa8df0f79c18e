import csv
import json
import math
import warnings

import numpy as np
import pytest

from mtfa import symplectic as sp
from mtfa.bench import TrialContext, baseline, example
from mtfa.optimizer import (BudgetExhausted, BudgetTooSmall, Scenario, matrices, objective, optimize, params_for,
                            with_coset)
from mtfa.signals import add_awgn, metrics

SEED = 20240601


def lfm_scenario(**kw):
    ex = example(1)
    args = dict(kind="LFM", interval=ex.interval, fs=ex.fs, snr_db=(0.0,), trials=2, seed=SEED)
    args.update(kw)
    return Scenario(**args)


def test_zero_params_reproduce_classical_baseline():
    sc = lfm_scenario()
    ctx = TrialContext.build(example(1))
    mses = []
    for k in range(sc.trials):
        g = add_awgn(ctx.reference, 0.0, SEED, k)
        mses.append(metrics(baseline("adaptive-cd", g, ctx, 0.0), ctx.reference).mse)
    assert objective(np.zeros(sc.param_count), sc) == pytest.approx(np.mean(mses), rel=1e-12)


def test_objective_is_deterministic():
    sc = lfm_scenario()
    p = np.array([0.1, -0.2, 0.05])
    assert objective(p, sc) == objective(p.copy(), sc)


def test_example_matrix_changes_objective():
    sc = lfm_scenario()
    p = params_for({"M1": example(1).mwd.M1}, sc)
    assert matrices(p, sc)["M1"].allclose(example(1).mwd.M1, 1e-9)
    assert objective(p, sc) != objective(np.zeros(3), sc)


def test_objective_rejects_nonfinite_and_maps_failures():
    sc = lfm_scenario()
    with pytest.raises(ValueError):
        objective([np.nan, 0, 0], sc)
    # an enormous chart point overflows the matrix exponential; the failure scores +inf
    assert objective([0.0, 0.0, 60.0], sc) == math.inf


def test_single_evaluation_returns_seed_point():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BudgetTooSmall)
        res = optimize(None, 1, fn=lambda p: float(np.sum(p**2)) + 1.0, n_params=3, x0=[0.5, 0.0, -0.5])
    assert np.array_equal(res.params, [0.5, 0.0, -0.5])
    assert res.evaluations == 1 and res.objective == 1.5


def test_quadratic_surrogate_converges():
    target = np.array([0.3, -0.7, 1.1])
    weights = np.array([1.0, 3.0, 0.5])
    res = optimize(None, 600, restarts=2, fn=lambda p: float(np.sum(weights * (p - target) ** 2)), n_params=3)
    assert np.abs(res.params - target).max() <= 1e-3
    assert not res.budget_exhausted


def test_best_so_far_is_monotone_and_budget_respected():
    fn = lambda p: float(np.sum(np.cos(3 * p)) + 0.1 * np.sum(p**2))  # noqa: E731
    with pytest.warns(BudgetExhausted):
        res = optimize(None, 80, restarts=3, seed=4, fn=fn, n_params=3)
    best = res.best_so_far()
    assert res.evaluations == 80
    assert np.all(np.diff(best) <= 0)
    assert res.objective == best[-1] and res.objective <= res.initial_objective


def test_small_budget_warns():
    with warnings.catch_warnings(), pytest.warns(BudgetTooSmall):
        warnings.simplefilter("ignore", BudgetExhausted)
        optimize(None, 10, fn=lambda p: float(np.sum(p**2)), n_params=3)


def test_budget_must_be_positive():
    with pytest.raises(ValueError):
        optimize(None, 0, fn=lambda p: 0.0, n_params=1)


def test_tied_pair_stays_identical():
    sc = Scenario.for_example(1, free=(("M1", "M2"), ("M4", "M5", "M6")), trials=1)
    assert sc.param_count == 3 + 10
    rng = np.random.default_rng(0)
    mats = matrices(0.2 * rng.standard_normal(sc.param_count), sc)
    assert mats["M1"] == mats["M2"]
    assert mats["M4"] == mats["M5"] == mats["M6"]
    for m in mats.values():
        sp.validate(m.entries, 1e-8)


def test_params_for_inverts_matrices():
    sc = Scenario.for_example(2, free=(("M1", "M2"),), trials=1)
    p = np.array([0.3, -0.1, 0.4])
    assert np.allclose(params_for(matrices(p, sc), sc), p, atol=1e-10)


def test_scenario_validation():
    with pytest.raises(ValueError):
        lfm_scenario(free=())
    with pytest.raises(ValueError):
        lfm_scenario(free=(("M7",),))
    with pytest.raises(ValueError):
        lfm_scenario(free=(("M1",), ("M1", "M2")))
    with pytest.raises(ValueError):
        lfm_scenario(free=(("M1", "M4"),))
    with pytest.raises(ValueError):
        Scenario.for_example(1, free=(("M", "M1"),))  # different base matrices cannot be tied
    with pytest.raises(ValueError):
        lfm_scenario(trials=0)
    with pytest.raises(ValueError):
        lfm_scenario(objective_kind="psnr")


def test_scenario_json_round_trip(tmp_path):
    sc = Scenario.for_example(3, free=(("M1", "M2"), ("M4", "M5", "M6")), snr_db=(-2.0, 2.0), trials=4)
    path = tmp_path / "s.json"
    path.write_text(json.dumps(sc.to_json_obj()))
    back = Scenario.load(path)
    assert back.free == sc.free and back.snr_db == sc.snr_db and back.trials == 4
    assert all(back.base[n] == sc.base[n] for n in sc.base)
    short = Scenario.from_json_obj({"example": 1, "free": [["M1", "M2"]], "trials": 2})
    assert short.kind == "LFM" and short.fs == 30.0 and short.base["M1"] == example(1).mwd.M1
    with pytest.raises(ValueError):
        Scenario.from_json_obj({"free": [["M1"]]})


def test_result_files(tmp_path):
    sc = lfm_scenario(trials=1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = optimize(sc, 8)
    res.write_trace(tmp_path / "t.csv")
    res.write_matrices(tmp_path / "m.json")
    rows = list(csv.reader((tmp_path / "t.csv").open()))
    assert rows[0] == ["eval_index", "objective", "p0", "p1", "p2"]
    assert len(rows) == 1 + res.evaluations
    obj = json.loads((tmp_path / "m.json").read_text())
    assert set(obj) >= {"M", "M1", "M6", "objective", "budget_exhausted"}
    assert sp.from_json_obj(obj["M1"]) == res.matrices["M1"]


def test_coset_restart_uses_j_chart():
    sc = lfm_scenario(trials=1)
    cs = with_coset(sc)
    assert cs.base["M1"].allclose(sp.compose(sp.special("J"), sc.base["M1"]), 1e-12)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = optimize(sc, 12, restarts=1, coset=True)
    assert res.evaluations == 12
    for m in res.matrices.values():
        sp.validate(m.entries, 1e-8)
    with pytest.raises(ValueError):
        optimize(None, 12, coset=True, fn=lambda p: 0.0, n_params=3)
