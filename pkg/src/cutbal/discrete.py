"""Discrete-time consensus x(t+1) = A(t) x(t) with row-stochastic A(t).

Steps are validated against three conditions: positive entries at least
alpha, diagonal at least alpha, and no one-way cut in the support.  Matrices
of ``fractions.Fraction`` (object arrays) are handled exactly, which keeps
stochasticity and monotonicity assertions free of rounding in small fixtures.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np

from .balance import MAX_EXHAUSTIVE_N, cut_flows, generate_cut_balanced
from .graph import InteractionGraph, check_weak_equals_strong, weakly_connected_components
from .scenario import Scenario, Trajectory

ROW_SUM_TOL = 1e-12
DEFAULT_FREQ = 0.05


class InvalidStepError(ValueError):
    """A step breaks one of the conditions; ``subset`` is a 0-based witness if any."""

    def __init__(self, message: str, subset: tuple[int, ...] | None = None):
        super().__init__(message)
        self.subset = subset


def _exact(a: np.ndarray) -> bool:
    return a.dtype == object


def _as_matrix(a) -> np.ndarray:
    arr = np.asarray(a)
    if arr.dtype != object:
        arr = arr.astype(float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InvalidStepError(f"expected a square matrix, got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class StochasticStep:
    a: np.ndarray
    alpha: float | Fraction

    @property
    def n(self) -> int:
        return self.a.shape[0]

    def support(self) -> np.ndarray:
        """Boolean off-diagonal pattern of positive entries."""
        s = np.asarray(self.a > 0, dtype=bool)
        np.fill_diagonal(s, False)
        return s


def support_graph(support: np.ndarray) -> InteractionGraph:
    """Edge (j, i) for every off-diagonal ``a_ij > 0``."""
    n = support.shape[0]
    return InteractionGraph(n, {(int(j), int(i)) for i, j in zip(*np.nonzero(support)) if i != j})


def one_way_cut(support: np.ndarray) -> tuple[int, ...] | None:
    """A subset with flow out of it but none back (0-based), by enumerating cuts."""
    masks, fwd, rev = cut_flows(support.astype(float), eps_zero=0.5)
    bad = (fwd > 0) != (rev > 0)
    if not bad.any():
        return None
    mask = int(masks[np.argmax(bad)])
    return tuple(i for i in range(support.shape[0]) if mask >> i & 1)


def dt_validate(a, alpha) -> StochasticStep:
    """Validate one step and return it with its lower bound attached."""
    a = _as_matrix(a)
    n = a.shape[0]
    if not alpha > 0:
        raise InvalidStepError("alpha must be positive")
    if np.any(a < 0):
        raise InvalidStepError("negative entry")
    rows = a.sum(axis=1)
    for i, r in enumerate(rows):
        if (r != 1) if _exact(a) else abs(float(r) - 1.0) > ROW_SUM_TOL:
            raise InvalidStepError(f"row {i + 1} is not stochastic (sum {float(r):.17g})", (i,))
    for i in range(n):
        if not a[i, i] >= alpha:
            raise InvalidStepError(f"diagonal entry a_{i + 1}{i + 1} = {float(a[i, i]):.6g} below alpha", (i,))
    small = (a > 0) & (a < alpha)
    if small.any():
        i, j = (int(v) for v in np.argwhere(small)[0])
        raise InvalidStepError(f"positive entry a_{i + 1}{j + 1} = {float(a[i, j]):.6g} below alpha", (i, j))
    step = StochasticStep(a, alpha)
    support = step.support()
    graph_ok, _ = check_weak_equals_strong(support_graph(support))
    if n <= MAX_EXHAUSTIVE_N:
        subset = one_way_cut(support)
        if (subset is None) != graph_ok:
            raise AssertionError("cut enumeration and component check disagree")
    else:
        subset = None if graph_ok else _one_way_component(support)
    if subset is not None:
        one = "{" + ",".join(str(i + 1) for i in subset) + "}"
        raise InvalidStepError(f"one-way cut: S={one} exchanges influence in one direction only", subset)
    return step


def _one_way_component(support: np.ndarray) -> tuple[int, ...]:
    from .graph import strongly_connected_components

    labels = strongly_connected_components(support_graph(support)).labels()
    i, j = next((int(i), int(j)) for i, j in zip(*np.nonzero(support)) if labels[i] != labels[j])
    return tuple(int(v) for v in np.nonzero(labels == labels[i])[0])


def infer_alpha(matrices) -> float:
    """Smallest positive entry over all matrices (diagonals included)."""
    lo = math.inf
    for a in matrices:
        a = np.asarray(a)
        pos = a[a > 0]
        if pos.size:
            lo = min(lo, pos.min())
    if lo is math.inf:
        raise InvalidStepError("no positive entries")
    return lo


# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DiscreteRun:
    trajectory: Trajectory
    alpha: float | Fraction
    graph: InteractionGraph | None
    component_limits: dict = field(default_factory=dict)  # block -> (min, max) at the final step
    isolation: dict = field(default_factory=dict)          # block -> first t after the last inflow
    monotonicity_violation: float = 0.0
    monotonicity_tol: float = 0.0  # 0 for exact arithmetic, rounding allowance otherwise

    @property
    def monotone(self) -> bool:
        return self.monotonicity_violation <= self.monotonicity_tol


def dt_run(steps: Iterable, x0, max_t: int, alpha=None, freq: float = DEFAULT_FREQ) -> DiscreteRun:
    """Iterate ``max_t`` steps.

    ``steps`` yields validated :class:`StochasticStep` objects or raw
    matrices; raw matrices are validated with ``alpha``.  Components come from
    the empirical unbounded graph (needs ``max_t >= 10``; otherwise none are
    reported).  After a component's isolation time its max must not increase
    and its min must not decrease; the worst breach is recorded.
    """
    x = np.asarray(x0)
    if x.dtype != object:
        x = x.astype(float)
    n = x.shape[0]
    if max_t < 0:
        raise ValueError("max_t must be >= 0")
    states, counts, history = [x.copy()], [np.zeros((n, n))], []
    alpha_seen = None
    it = iter(steps)
    for t in range(max_t):
        try:
            raw = next(it)
        except StopIteration:
            raise ValueError(f"step source ended after {t} steps, {max_t} requested") from None
        if isinstance(raw, StochasticStep):
            step = raw
        else:
            if alpha is None:
                raise ValueError("alpha is required for raw matrices")
            step = dt_validate(raw, alpha)
        if step.n != n:
            raise InvalidStepError(f"step {t} has n = {step.n}, expected {n}")
        alpha_seen = step.alpha if alpha_seen is None else min(alpha_seen, step.alpha)
        support = step.support()
        x = step.a.dot(x)
        states.append(x.copy())
        counts.append(counts[-1] + support)
        history.append(support)
    times = np.arange(max_t + 1, dtype=float)
    tr = Trajectory(times, np.array(states), np.array(counts), discrete=True)
    graph = dt_unbounded_graph(history, freq) if max_t >= 10 else None
    limits, isolation, worst = {}, {}, 0.0
    if graph is not None:
        for block in weakly_connected_components(graph).blocks:
            inside = np.zeros(n, dtype=bool)
            inside[list(block)] = True
            inflow = [t for t, s in enumerate(history) if s[np.ix_(inside, ~inside)].any()]
            start = inflow[-1] + 1 if inflow else 0
            isolation[block] = start
            sub = tr.states[start:, list(block)]
            hi, lo = sub.max(axis=1), sub.min(axis=1)
            up = np.diff(hi).max(initial=0)
            down = -np.diff(lo).min(initial=0)
            worst = max(worst, float(up), float(down))
            limits[block] = (tr.states[-1, list(block)].min(), tr.states[-1, list(block)].max())
    tol = 0.0 if x.dtype == object else 1e-12 * max(1.0, float(np.abs(tr.states[0]).max(initial=0)))
    return DiscreteRun(tr, alpha_seen if alpha_seen is not None else alpha, graph, limits, isolation,
                       worst, tol)


def dt_integrate(sc: Scenario) -> DiscreteRun:
    """Run a discrete-mode scenario: step t uses the schedule's matrix at time t."""
    if sc.mode != "discrete":
        raise ValueError("dt_integrate needs a discrete-mode scenario")
    max_t = int(math.floor(sc.horizon + 1e-9))
    mats = [sc.schedule.evaluate(float(t)) for t in range(max_t)]
    alpha = sc.integrator.alpha if sc.integrator.alpha is not None else infer_alpha(mats)
    return dt_run((dt_validate(a, alpha) for a in mats), sc.x0, max_t)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ContractionCertificate:
    t_start: int
    t_end: int
    factor: float   # observed spread ratio
    bound: float    # 1 - alpha^(|C|-1)


def _spread(tr: Trajectory, C, t: int) -> float:
    vals = tr.states[t, list(C)]
    return float(vals.max() - vals.min())


def dt_contraction_certificate(tr: Trajectory, C, alpha, t_prime: int) -> ContractionCertificate | None:
    """First ``t'' > t'`` with ``spread_C(t'') <= (1 - alpha^(|C|-1)) spread_C(t')``, or None."""
    C = tuple(C)
    bound = 1.0 - float(alpha) ** (len(C) - 1)
    last = len(tr.times) - 1
    if t_prime >= last:
        return None
    s0 = _spread(tr, C, t_prime)
    if len(C) == 1 or s0 == 0:
        return ContractionCertificate(t_prime, t_prime + 1, 0.0, bound)
    for t in range(t_prime + 1, last + 1):
        s = _spread(tr, C, t)
        if s <= bound * s0:
            return ContractionCertificate(t_prime, t, s / s0, bound)
    return None


def certificate_chain(tr: Trajectory, C, alpha, t_prime: int = 0) -> list[ContractionCertificate]:
    """Back-to-back certificates from ``t_prime`` until none is found."""
    out = []
    cert = dt_contraction_certificate(tr, C, alpha, t_prime)
    while cert is not None:
        out.append(cert)
        if cert.factor == 0:
            break
        cert = dt_contraction_certificate(tr, C, alpha, cert.t_end)
    return out


def dt_unbounded_graph(history, frac: float = DEFAULT_FREQ) -> InteractionGraph:
    """Edge (j, i) iff ``a_ij > 0`` in at least ``frac`` of the trailing half of the steps."""
    mats = [h.a if isinstance(h, StochasticStep) else np.asarray(h) for h in history]
    if len(mats) < 10:
        raise ValueError(f"history has {len(mats)} steps, at least 10 needed")
    tail = mats[len(mats) // 2:]
    active = np.mean([np.asarray(m > 0, dtype=float) for m in tail], axis=0)
    keep = active >= frac
    np.fill_diagonal(keep, False)
    n = keep.shape[0]
    edges = {(int(j), int(i)) for i, j in zip(*np.nonzero(keep))}
    weights = {(j, i): float(active[i, j]) for j, i in edges}
    rule = {"heuristic": "trailing-half activation frequency", "freq": frac, "steps": len(mats)}
    return InteractionGraph(n, edges, weights, rule)


# ---------------------------------------------------------------------------


def random_step(n: int, alpha: float, rng: np.random.Generator, density: float = 0.5) -> StochasticStep:
    """Random validated step on a symmetric support pattern.

    Every positive entry gets alpha plus a random share of the slack
    ``1 - (deg_i + 1) alpha``; the diagonal absorbs the rounding.
    """
    pattern = generate_cut_balanced(n, 1.0, density, seed=rng) > 0
    deg = pattern.sum(axis=1)
    if np.any((deg + 1) * alpha > 1):
        raise ValueError(f"alpha = {alpha} too large for degree {int(deg.max())}")
    weights = np.where(pattern | np.eye(n, dtype=bool), rng.uniform(0.2, 1.0, (n, n)), 0.0)
    shares = weights / weights.sum(axis=1, keepdims=True)
    slack = 1.0 - (deg + 1) * alpha
    a = np.where(weights > 0, alpha + slack[:, None] * shares, 0.0)
    idx = np.arange(n)
    a[idx, idx] = 0.0
    a[idx, idx] = 1.0 - a.sum(axis=1)
    return dt_validate(a, alpha)


def random_step_sequence(n: int, alpha: float, length: int, seed: int, density: float = 0.5) -> list[StochasticStep]:
    """Steps keyed by ``(seed, t)`` so any prefix replays identically."""
    return [random_step(n, alpha, np.random.default_rng([seed, t]), density) for t in range(length)]


def uniform_step(n: int, exact: bool = False) -> StochasticStep:
    """All entries ``1/n``: consensus in one step."""
    if exact:
        a = np.full((n, n), Fraction(1, n), dtype=object)
        return dt_validate(a, Fraction(1, n))
    return dt_validate(np.full((n, n), 1.0 / n), 1.0 / n)
