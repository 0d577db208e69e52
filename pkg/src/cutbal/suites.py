"""Seeded property suites; every trial draws from ``default_rng([seed, trial])``."""
from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .balance import generate_cut_balanced, lemma1_functional, verify_cut_balance
from .discrete import certificate_chain, dt_run, random_step_sequence, uniform_step
from .dynamics import integrate, residual_check
from .graph import (
    NotConvergedError,
    check_weak_equals_strong,
    classify_unbounded_edges,
    compare_partitions,
    limit_partition,
    predict_clusters,
    weakly_connected_components,
)
from .scenario import IntegratorSettings, Scenario
from .schedules import PiecewiseConstant
from .sorting import sort_permutation, sorted_evolution_residual

SUITES = ("lemma1", "theorem1", "theorem2", "appendix")
DEFAULT_TRIALS = {"lemma1": 10_000, "theorem1": 100, "theorem2": 100, "appendix": 100_000}


@dataclass
class SuiteResult:
    name: str
    trials: int
    passed: bool
    stats: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def lines(self) -> list[str]:
        head = f"suite {self.name}: {'PASS' if self.passed else 'FAIL'} ({self.trials} trials)"
        out = [head] + [f"  {k}: {v}" for k, v in sorted(self.stats.items())]
        out += [f"  warning: {w}" for w in self.warnings]
        out += [f"  failure: {f}" for f in self.failures[:10]]
        return out


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("CUTBAL_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn: Callable[[int], dict], trials: int) -> list[dict]:
    workers = min(_threads(), max(1, trials))
    if workers == 1:
        return [fn(k) for k in range(trials)]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(fn, range(trials)))


def _rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng([seed, trial])


# ---------------------------------------------------------------------------


def _lemma1_trial(seed: int, trial: int) -> dict:
    rng = _rng(seed, trial)
    n = int(rng.integers(2, 9))
    K = float(rng.choice([1.0, 2.0, 5.0, 10.0]))
    b = generate_cut_balanced(n, K, density=float(rng.uniform(0.3, 1.0)), seed=rng)
    ok, _ = verify_cut_balance(b, K)
    y = np.sort(rng.normal(size=n))
    worst = min(lemma1_functional(b, y, m, K) for m in range(1, n + 1))
    return {"ok": ok and worst >= -1e-10, "value": worst, "balanced": ok, "n": n, "K": K}


def _theorem1_scenario(rng: np.random.Generator) -> tuple[Scenario, list[list[int]], float]:
    """Groups connected persistently; cross-group links only before t = 1."""
    n = int(rng.integers(3, 7))
    groups = int(rng.integers(1, min(n, 3) + 1))
    labels = np.concatenate([np.arange(groups), rng.integers(0, groups, n - groups)])
    rng.shuffle(labels)
    K = float(rng.choice([1.0, 2.0, 4.0]))
    same = labels[:, None] == labels[None, :]
    full = generate_cut_balanced(n, K, density=1.0, seed=rng)
    inside = [np.where(same, generate_cut_balanced(n, K, density=1.0, seed=rng), 0.0) for _ in range(2)]
    horizon = 30.0
    breaks = (0.0, 1.0, 10.0, 20.0, horizon)
    mats = (full, inside[0], inside[1], inside[0])
    sched = PiecewiseConstant(breaks, mats)
    x0 = rng.uniform(0.0, 1.0, n)
    sc = Scenario(n, sched, x0, horizon, IntegratorSettings("rk4", 1e-2, 1e-6))
    blocks = [list(np.nonzero(labels == g)[0]) for g in range(groups)]
    return sc, blocks, K


def _theorem1_trial(seed: int, trial: int) -> dict:
    rng = _rng(seed, trial)
    sc, _, K = _theorem1_scenario(rng)
    balanced = all(verify_cut_balance(m, K)[0] for m in sc.schedule.matrices)
    tr = integrate(sc)
    graph = classify_unbounded_edges(tr)
    weak_strong, _ = check_weak_equals_strong(graph)
    try:
        observed = limit_partition(tr, 1e-4, sc.integrator.tol)
    except NotConvergedError:
        return {"ok": False, "verdict": "not converged", "balanced": balanced}
    verdict = compare_partitions(predict_clusters(graph), observed).verdict
    return {"ok": balanced and weak_strong and verdict in ("equal", "refinement"), "verdict": verdict,
            "balanced": balanced}


def _theorem2_trial(seed: int, trial: int, alpha: float = 0.1, length: int = 150) -> dict:
    rng = _rng(seed, trial)
    n = int(rng.integers(2, 9))
    steps = random_step_sequence(n, alpha, length, seed * 1_000_003 + trial)
    run = dt_run(steps, rng.uniform(0.0, 1.0, n), length)
    blocks = weakly_connected_components(run.graph).blocks
    spread = float(np.ptp(run.trajectory.final))
    chain = certificate_chain(run.trajectory, blocks[0], alpha) if len(blocks) == 1 else []
    worst = max((c.factor - c.bound for c in chain), default=0.0)
    ok = len(blocks) == 1 and spread <= 1e-8 and bool(chain) and worst <= 1e-12 and run.monotone
    return {"ok": ok, "spread": spread, "certificates": len(chain), "worst_excess": worst, "n": n}


def _appendix_trial(seed: int, trial: int) -> dict:
    rng = _rng(seed, trial)
    n = int(rng.integers(1, 12))
    x = rng.integers(0, 4, n).astype(float)  # small range forces duplicates
    p = sort_permutation(x)
    xp = x[p]
    ok = sorted(p.tolist()) == list(range(n)) and all(
        xp[i] < xp[i + 1] or (xp[i] == xp[i + 1] and p[i] < p[i + 1]) for i in range(n - 1))
    return {"ok": ok}


def _crossing_trial(seed: int, trial: int) -> dict:
    rng = _rng(seed, 10**9 + trial)
    n = int(rng.integers(3, 6))
    a = generate_cut_balanced(n, 2.0, density=0.7, seed=rng) * rng.uniform(0.5, 3.0)
    sc = Scenario(n, PiecewiseConstant.constant(a, 5.0), rng.uniform(0, 1, n), 5.0,
                  IntegratorSettings("rk4", 1e-3, 1e-6))
    tr = integrate(sc)
    res = sorted_evolution_residual(tr, sc)
    return {"ok": res <= 1e-5, "residual": res, "unsorted": residual_check(tr, sc)}


def run_suite(name: str, trials: int | None = None, seed: int = 0) -> SuiteResult:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    trials = DEFAULT_TRIALS[name] if trials is None else int(trials)
    if trials < 0:
        raise ValueError("trials must be >= 0")
    if trials == 0:
        msg = "0 trials: suite passes vacuously"
        warnings.warn(msg, stacklevel=2)
        return SuiteResult(name, 0, True, warnings=[msg])
    trial_fn = {"lemma1": _lemma1_trial, "theorem1": _theorem1_trial,
                "theorem2": _theorem2_trial, "appendix": _appendix_trial}[name]
    results = _map(lambda k: trial_fn(seed, k), trials)
    failures = [f"trial {k}: {r}" for k, r in enumerate(results) if not r["ok"]]
    stats: dict = {}
    passed = not failures
    if name == "lemma1":
        stats["min_functional"] = min(r["value"] for r in results)
    elif name == "theorem1":
        equal = sum(r["verdict"] == "equal" for r in results)
        stats["equal_fraction"] = equal / trials
        stats["refinement"] = sum(r["verdict"] == "refinement" for r in results)
        passed = passed and equal >= 0.95 * trials
    elif name == "theorem2":
        stats["max_spread"] = max(r["spread"] for r in results)
        stats["min_certificates"] = min(r["certificates"] for r in results)
        one = dt_run([uniform_step(4, exact=True)], np.array([0, 1, 2, 5], dtype=object), 1)
        stats["one_step_consensus"] = bool(len(set(one.trajectory.final.tolist())) == 1)
        passed = passed and stats["one_step_consensus"]
    else:
        crossings = _map(lambda k: _crossing_trial(seed, k), min(trials, 10))
        stats["max_sorted_residual"] = max(r["residual"] for r in crossings)
        failures += [f"crossing trial {k}: {r}" for k, r in enumerate(crossings) if not r["ok"]]
        passed = not failures
    return SuiteResult(name, trials, passed, stats, failures)
