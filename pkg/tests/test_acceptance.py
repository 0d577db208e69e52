"""Acceptance criteria, one test each; every test prints a single PASS/FAIL line."""
import math
import time
import warnings

import numpy as np
from hypothesis import given, settings, strategies as st

from cutbal.balance import minimal_cut_balance_K
from cutbal.catalog import CATALOG, bounded_confidence
from cutbal.dynamics import integrate, run_example1, run_example2, run_t_quarter_experiment
from cutbal.graph import (
    NotConvergedError,
    check_weak_equals_strong,
    classify_unbounded_edges,
    compare_partitions,
    limit_partition,
    predict_clusters,
)
from cutbal.schedules import ClosedForm, Endogenous
from cutbal.sorting import monotonicity_check, sorted_evolution_residual, weighted_sum_series
from cutbal.suites import run_suite


def test_criterion_01_example1_fidelity(criterion):
    start = time.perf_counter()
    res = run_example1(horizon=50.0, h=1e-3)
    elapsed = time.perf_counter() - start
    t = res.trajectory.times
    exact = np.column_stack([3 + np.exp(-t), np.sin(t), -3 - np.exp(-t)])
    dev = float(np.max(np.abs(res.trajectory.states - exact)))
    x2 = res.trajectory.states[t >= 40.0, 1]
    spread = float(x2.max() - x2.min())
    ok = dev <= 1e-6 and 1.9 <= spread <= 2.0 and elapsed < 5.0
    assert criterion(1, ok, f"deviation {dev:.2e}, x_2 spread on [40,50] {spread:.6f}, {elapsed:.2f} s")


@settings(max_examples=200, deadline=None)
@given(n=st.integers(1, 8), seed=st.integers(0, 10**6))
def check_symmetric_is_one(n, seed):
    a = np.random.default_rng(seed).random((n, n))
    assert minimal_cut_balance_K(a + a.T) == 1.0


def test_criterion_02_minimal_K(criterion):
    k_ex1 = minimal_cut_balance_K(ClosedForm("example1").evaluate(0.0))
    cap = ClosedForm("capacitor-network", {"capacitance": [1.0, 2.0], "conductance": [[0, 1], [1, 0]]})
    k_cap = minimal_cut_balance_K(cap.evaluate(0.0))
    try:
        check_symmetric_is_one()
        sym = True
    except AssertionError:
        sym = False
    ok = abs(k_ex1 - 2.5) <= 1e-12 and k_cap == 2.0 and sym
    assert criterion(2, ok, f"example 1 at t=0: {k_ex1!r}, capacitor C=(1,2): {k_cap}, symmetric -> 1: {sym}")


def test_criterion_03_lemma1_oracle(criterion):
    start = time.perf_counter()
    res = run_suite("lemma1", 10_000, seed=0)
    elapsed = time.perf_counter() - start
    ok = res.passed and res.stats["min_functional"] >= -1e-10 and elapsed < 10.0
    assert criterion(3, ok, f"10^4 trials, min functional {res.stats['min_functional']:.2e}, {elapsed:.2f} s")


def test_criterion_04_sm_monotone(catalog_runs, criterion):
    checked, worst, bad = 0, 0.0, []
    for name, (entry, sc, tr) in catalog_runs.items():
        if not entry.cut_balanced:
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("error")  # a sampled K above the entry's K would fail here
            series = weighted_sum_series(tr, sc, entry.K)
        res = monotonicity_check(series, 100 * sc.integrator.tol, tr.times)
        checked += 1
        worst = max(worst, res.worst_violation)
        if not res.ok:
            bad.append(name)
    ok = checked >= 10 and not bad
    assert criterion(4, ok, f"{checked} scenarios, worst drop {worst:.2e}" + (f", failing {bad}" if bad else ""))


def test_criterion_05_example2(criterion):
    res = run_example2((0.0, 0.4, 0.6, 1.0))
    t_star = math.log(1.5) / 2
    lim_err = float(np.max(np.abs(res.limits - [0.1, 0.5, 0.5, 0.9])))
    part = str(limit_partition(res.trajectory))
    ok = lim_err <= 1e-6 and abs(res.merge_time - t_star) <= 1e-3 and part == "{{1},{2,3},{4}}"
    assert criterion(5, ok, f"limit error {lim_err:.1e}, t* error {abs(res.merge_time - t_star):.1e}, "
                            f"partition {part}")


def test_criterion_06_bounded_confidence(criterion):
    worst_in, worst_gap, worst_mean = 0.0, math.inf, 0.0
    for seed in range(50):
        sc = bounded_confidence(seed=seed, n=20, horizon=50.0, h=0.02)
        tr = integrate(sc)
        x = np.sort(tr.final)
        gaps = np.diff(x)
        close = gaps <= 1e-4
        worst_in = max(worst_in, float(gaps[close].max(initial=0.0)))
        worst_gap = min(worst_gap, float(gaps[~close].min(initial=math.inf)))
        worst_mean = max(worst_mean, float(np.max(np.abs(tr.states.mean(axis=1) - sc.x0.mean()))))
    ok = worst_gap >= 1 - 1e-3 and worst_mean <= 1e-6
    assert criterion(6, ok, f"50 runs, widest merged gap {worst_in:.1e}, narrowest separation {worst_gap:.4f}, "
                            f"mean drift {worst_mean:.1e}")


def test_criterion_07_theorem1_pipeline(catalog_runs, criterion):
    verdicts, bad = {}, []
    for name, (entry, sc, tr) in catalog_runs.items():
        if not entry.cut_balanced or isinstance(sc.schedule, Endogenous):
            continue
        graph = classify_unbounded_edges(tr)
        try:
            verdict = compare_partitions(predict_clusters(graph), limit_partition(tr, 1e-4, sc.integrator.tol)).verdict
        except NotConvergedError:
            verdict = "not converged"
        verdicts[name] = verdict
        if not check_weak_equals_strong(graph)[0] or verdict not in ("equal", "refinement"):
            bad.append(name)
    suite = run_suite("theorem1", 100, seed=0)
    frac = suite.stats["equal_fraction"]
    ok = not bad and suite.passed and frac >= 0.95
    assert criterion(7, ok, f"{len(verdicts)} catalogue scenarios {sorted(set(verdicts.values()))}, "
                            f"100 random trials equal fraction {frac:.2f}" + (f", failing {bad}" if bad else ""))


def test_criterion_08_t_quarter(criterion):
    cert = run_t_quarter_experiment(2, 5, 0.2)
    ok = cert.max_v1 <= 0.25 + 1e-6 and cert.min_v2 >= 0.75 - 1e-6
    assert criterion(8, ok, f"tail budget {cert.tail_budget:.3f}, max V1 {cert.max_v1:.4f}, min V2 {cert.min_v2:.4f}")


def test_criterion_09_theorem2(criterion):
    res = run_suite("theorem2", 100, seed=0)
    ok = res.passed and res.stats["max_spread"] <= 1e-8 and res.stats["one_step_consensus"]
    assert criterion(9, ok, f"100 sequences, max final spread {res.stats['max_spread']:.1e}, "
                            f"min certificates {res.stats['min_certificates']}, "
                            f"one-step consensus {res.stats['one_step_consensus']}")


def test_criterion_10_sorted_process(catalog_runs, criterion):
    residuals = {name: sorted_evolution_residual(tr, sc) for name, (_, sc, tr) in catalog_runs.items()}
    worst = max(residuals.values())
    suite = run_suite("appendix", 100_000, seed=0)
    ok = worst <= 1e-5 and "example2" in residuals and suite.passed
    assert criterion(10, ok, f"{len(residuals)} catalogue runs, worst sorted residual {worst:.2e}, "
                             f"10^5 permutation vectors {'ok' if suite.passed else 'failed'}")
