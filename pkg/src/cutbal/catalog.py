"""Built-in scenarios."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .discrete import random_step_sequence
from .scenario import IntegratorSettings, Scenario
from .schedules import ClosedForm, Endogenous, PiecewiseConstant, RandomMarkov


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    description: str
    build: Callable[[], Scenario]
    cut_balanced: bool
    K: float | None = None   # a valid cut-balance constant for every t, when one exists

    def scenario(self) -> Scenario:
        return self.build()


def _rk4(h: float, tol: float = 1e-6) -> IntegratorSettings:
    return IntegratorSettings("rk4", h, tol)


def two_agent() -> Scenario:
    a = np.array([[0.0, 1.0], [1.0, 0.0]])
    return Scenario(2, ClosedForm("constant", {"matrix": a.tolist()}), np.array([0.0, 1.0]), 10.0, _rk4(1e-3))


def example1() -> Scenario:
    return Scenario(3, ClosedForm("example1"), np.array([4.0, 0.0, -4.0]), 50.0, _rk4(1e-3))


def example2() -> Scenario:
    return Scenario(4, Endogenous("example2", {}, 4), np.array([0.0, 0.4, 0.6, 1.0]), 5.0, _rk4(1e-3))


def capacitor() -> Scenario:
    g = [[0.0, 1.0, 0.5], [1.0, 0.0, 2.0], [0.5, 2.0, 0.0]]
    params = {"capacitance": [1.0, 2.0, 4.0], "conductance": g, "modulation": 0.5, "omega": 2.0}
    return Scenario(3, ClosedForm("capacitor-network", params), np.array([1.0, 0.0, -1.0]), 20.0, _rk4(1e-3))


def t_quarter() -> Scenario:
    params = {"m": 2, "n": 5, "budget": 0.2, "inner": 1.0, "rate": 1.0}
    x0 = np.array([0.0, 0.0, 1.0, 1.0, 1.0])
    return Scenario(5, ClosedForm("t-quarter", params), x0, 20.0, _rk4(1e-3))


def decaying_tail() -> Scenario:
    # two persistent pairs {1,2}, {3,4}; cross links decay with a 2:1 ratio
    per = np.zeros((4, 4))
    per[0, 1] = per[1, 0] = 1.0
    per[2, 3] = per[3, 2] = 0.5
    tr = np.zeros((4, 4))
    tr[0, 2], tr[2, 0] = 2.0, 1.0
    tr[1, 3], tr[3, 1] = 0.6, 0.3
    params = {"persistent": per.tolist(), "transient": tr.tolist(), "rate": 1.0}
    return Scenario(4, ClosedForm("decaying-tail", params), np.array([0.0, 1.0, 2.0, 3.0]), 40.0, _rk4(1e-3))


def bounded_confidence(seed: int = 7, n: int = 20, horizon: float = 40.0, h: float = 1e-3) -> Scenario:
    x0 = np.random.default_rng(seed).uniform(0.0, 10.0, n)
    return Scenario(n, Endogenous("bounded-confidence", {"radius": 1.0}, n), x0, horizon, _rk4(h), seed=seed)


def normalized_bc() -> Scenario:
    x0 = np.array([0.0, 0.5, 1.2, 1.9, 3.5, 4.1, 4.4, 6.0])
    return Scenario(8, Endogenous("normalized-bounded-confidence", {"radius": 1.0}, 8), x0, 30.0, _rk4(1e-3))


def kernel() -> Scenario:
    x0 = np.array([0.0, 0.7, 1.5, 3.6, 4.2, 5.0])
    params = {"kernel": "radially-decreasing-threshold", "radius": 1.5}
    return Scenario(6, Endogenous("kernel", params, 6), x0, 30.0, _rk4(1e-3))


def random_markov() -> Scenario:
    path = np.zeros((4, 4))
    for i, (f, r) in enumerate([(1.0, 0.5), (0.8, 1.6), (1.0, 2.0)]):
        path[i, i + 1], path[i + 1, i] = f, r
    ring = np.zeros((4, 4))
    ring[0, 3] = ring[3, 0] = 1.0
    ring[1, 2], ring[2, 1] = 0.5, 1.0
    trans = [[0.3, 0.7], [0.6, 0.4]]
    sched = RandomMarkov((path, ring), np.array(trans), 0.5, seed=11, horizon=20.0)
    return Scenario(4, sched, np.array([0.0, 1.0, 3.0, 4.0]), 20.0, _rk4(1e-3), seed=11)


def crossing() -> Scenario:
    # agent 1 is pulled past agent 2 by the strong 1-3 link
    a = np.zeros((3, 3))
    a[0, 2] = a[2, 0] = 5.0
    a[0, 1] = a[1, 0] = 0.2
    return Scenario(3, ClosedForm("constant", {"matrix": a.tolist()}), np.array([0.0, 0.5, 2.0]), 50.0, _rk4(5e-4))


def piecewise_switching() -> Scenario:
    p = np.zeros((4, 4))
    p[0, 1], p[1, 0] = 3.0, 1.0
    p[2, 3], p[3, 2] = 1.0, 3.0
    q = np.zeros((4, 4))
    q[1, 2], q[2, 1] = 1.0, 2.0
    q[0, 3] = q[3, 0] = 0.5
    breaks = tuple(2.5 * k for k in range(13))
    mats = tuple(p if k % 2 == 0 else q for k in range(len(breaks) - 1))
    return Scenario(4, PiecewiseConstant(breaks, mats), np.array([3.0, -1.0, 0.5, 2.0]), 30.0, _rk4(1e-3))


def dt_random(seed: int = 5, n: int = 5, steps: int = 60) -> Scenario:
    seq = random_step_sequence(n, 0.1, steps, seed)
    sched = PiecewiseConstant(tuple(float(t) for t in range(steps + 1)), tuple(s.a for s in seq), zero_diagonal=False)
    x0 = np.random.default_rng(seed).uniform(0.0, 1.0, n)
    integ = IntegratorSettings("rk4", 1.0, 1e-6, alpha=0.1)
    return Scenario(n, sched, x0, float(steps), integ, seed=seed, mode="discrete")


def dt_one_step(n: int = 4) -> Scenario:
    sched = PiecewiseConstant((0.0, 1.0), (np.full((n, n), 1.0 / n),), zero_diagonal=False)
    integ = IntegratorSettings("rk4", 1.0, 1e-6, alpha=1.0 / n)
    return Scenario(n, sched, np.arange(n, dtype=float), 1.0, integ, mode="discrete")


CATALOG: dict[str, CatalogEntry] = {e.name: e for e in [
    CatalogEntry("two-agent", "two agents with a constant symmetric link", two_agent, True, 1.0),
    CatalogEntry("example1", "three agents, no finite cut-balance constant; x_2 keeps oscillating",
                 example1, False),
    CatalogEntry("example2", "pairs (1,3), (2,4) attract while strictly ordered", example2, True, 1.0),
    CatalogEntry("capacitor", "RC network, capacitances (1,2,4), modulated conductances",
                 capacitor, True, 4.0),
    CatalogEntry("t-quarter", "two groups with a cross tail budget of 0.2", t_quarter, True, 1.0),
    CatalogEntry("decaying-tail", "two persistent pairs with integrable cross links", decaying_tail, True, 2.0),
    CatalogEntry("bounded-confidence", "20 agents, radius 1, values on [0, 10]", bounded_confidence, True, 1.0),
    CatalogEntry("normalized-bc", "8 agents, averaging over the neighbours within radius 1",
                 normalized_bc, True, 8.0),
    CatalogEntry("kernel", "6 agents, weights 1 - (z/r)^2 within radius 1.5", kernel, True, 1.0),
    CatalogEntry("random-markov", "4 agents switching between two type-symmetric graphs",
                 random_markov, True, 2.0),
    CatalogEntry("crossing", "3 agents, agent 1 overtakes agent 2", crossing, True, 1.0),
    CatalogEntry("piecewise-switching", "4 agents, two type-symmetric graphs alternating",
                 piecewise_switching, True, 3.0),
    CatalogEntry("dt-random", "discrete time, 5 agents, random validated steps", dt_random, True),
    CatalogEntry("dt-one-step", "discrete time, one all-1/n step", dt_one_step, True),
]}


def get(name: str) -> CatalogEntry:
    try:
        return CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown catalogue scenario {name!r}; try one of: {', '.join(CATALOG)}") from None
