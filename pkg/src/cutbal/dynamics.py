"""Continuous-time consensus dynamics x_i' = sum_j a_ij (x_j - x_i).

Fixed-step RK4 (or Euler).  Time-driven schedules are stepped exactly onto
their breakpoints and evaluated with one-sided limits, so every step sees a
smooth right-hand side.  Endogenous rules are frozen at the mode found at the
start of each step; a mode change inside a step is bracketed by bisection
down to ``EVENT_RESOLUTION`` and both bracket ends become samples.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scenario import IntegratorSettings, Scenario, Trajectory
from .schedules import ClosedForm, Endogenous

EVENT_RESOLUTION = 1e-10
MAX_EVENTS_PER_STEP = 64
_CHUNK = 4096


class IntegrationError(RuntimeError):
    pass


def laplacian(a: np.ndarray) -> np.ndarray:
    """``a - diag(row sums)`` so that ``x' = laplacian(a) @ x``; works on stacks."""
    return a - np.eye(a.shape[-1]) * a.sum(axis=-1)[..., None]


def _step_grid(horizon: float, h: float, stride: int, breaks) -> tuple[np.ndarray, np.ndarray]:
    steps = max(1, int(math.ceil(horizon / h - 1e-9)))
    grid = np.arange(steps + 1) * h
    grid[-1] = horizon
    sample = np.arange(steps + 1) % stride == 0
    sample[-1] = True
    extra = []
    for b in breaks:
        k = int(np.argmin(np.abs(grid - b)))
        if abs(grid[k] - b) <= 1e-12 * max(1.0, horizon):
            grid[k] = b
            sample[k] = True
        else:
            extra.append(b)
    if extra:
        grid = np.concatenate([grid, extra])
        sample = np.concatenate([sample, np.ones(len(extra), dtype=bool)])
        order = np.argsort(grid, kind="stable")
        grid, sample = grid[order], sample[order]
    return grid, sample


def integrate(sc: Scenario) -> Trajectory:
    """Solve the integral equation on ``[0, sc.horizon]``.

    Samples every ``stride`` steps, at breakpoints, at both ends of each
    refined event, and at the horizon.  Interaction integrals accumulate with
    the trapezoid rule on the step grid (one-sided limits at the ends).
    """
    if sc.mode != "continuous":
        raise ValueError("integrate needs a continuous-mode scenario")
    # overflow surfaces as IntegrationError, not as numpy warnings
    with np.errstate(over="ignore", invalid="ignore"):
        if sc.schedule.endogenous:
            return _integrate_endogenous(sc)
        return _integrate_linear(sc)


def _blowup(t: float) -> IntegrationError:
    return IntegrationError(f"non-finite state at t = {t:.6g}")


def _integrate_linear(sc: Scenario) -> Trajectory:
    sched, settings = sc.schedule, sc.integrator
    grid, sample = _step_grid(sc.horizon, settings.h, sc.stride, sched.breakpoints(sc.horizon))
    rk4 = settings.method == "rk4"
    x = sc.x0.copy()
    acc = np.zeros((sc.n, sc.n))
    times, states, integrals = [0.0], [x.copy()], [acc.copy()]
    nsteps = len(grid) - 1
    for lo in range(0, nsteps, _CHUNK):
        hi = min(nsteps, lo + _CHUNK)
        t0, t1 = grid[lo:hi], grid[lo + 1:hi + 1]
        hs = t1 - t0
        a0 = sched.evaluate_many(t0)
        a1 = sched.evaluate_many(t1, left=True)
        l0, l1 = laplacian(a0), laplacian(a1)
        if rk4:
            lm = laplacian(sched.evaluate_many(t0 + 0.5 * hs))
        cum = acc + np.cumsum(0.5 * hs[:, None, None] * (a0 + a1), axis=0)
        for k in range(hi - lo):
            h = hs[k]
            if rk4:
                k1 = l0[k] @ x
                k2 = lm[k] @ (x + 0.5 * h * k1)
                k3 = lm[k] @ (x + 0.5 * h * k2)
                k4 = l1[k] @ (x + h * k3)
                x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            else:
                x = x + h * (l0[k] @ x)
            if sample[lo + k + 1]:
                if not np.all(np.isfinite(x)):
                    raise _blowup(t1[k])
                times.append(float(t1[k]))
                states.append(x.copy())
                integrals.append(cum[k].copy())
        if not np.all(np.isfinite(x)):
            raise _blowup(t1[-1])
        acc = cum[-1]
    return Trajectory(np.array(times), np.array(states), np.array(integrals))


def _frozen_step(rule: Endogenous, x: np.ndarray, s: float, mode: np.ndarray, method: str) -> np.ndarray:
    if rule.rule != "kernel":
        lap = laplacian(rule.coefficients(x, mode))
        f = lambda y: lap @ y  # noqa: E731
    else:
        def f(y):
            a = rule.coefficients(y, mode)
            return a @ y - a.sum(axis=1) * y
    if method == "euler":
        return x + s * f(x)
    k1 = f(x)
    k2 = f(x + 0.5 * s * k1)
    k3 = f(x + 0.5 * s * k2)
    k4 = f(x + s * k3)
    return x + (s / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _integrate_endogenous(sc: Scenario) -> Trajectory:
    rule: Endogenous = sc.schedule
    settings = sc.integrator
    grid, sample = _step_grid(sc.horizon, settings.h, sc.stride, ())
    x = sc.x0.copy()
    acc = np.zeros((sc.n, sc.n))
    times, states, integrals, events = [0.0], [x.copy()], [acc.copy()], []

    def record(t, y):
        if t > times[-1]:
            times.append(float(t))
            states.append(y.copy())
            integrals.append(acc.copy())

    def step(y, s, mode):
        return _frozen_step(rule, y, s, mode, settings.method)

    for k in range(len(grid) - 1):
        t, t_end = grid[k], grid[k + 1]
        count = 0
        while t_end - t > 1e-14 * max(1.0, t_end):
            mode = rule.mode(x)
            a_start = rule.coefficients(x, mode)
            s = t_end - t
            x_new = step(x, s, mode)
            if not np.all(np.isfinite(x_new)):
                raise _blowup(t + s)
            if not settings.event_refine or np.array_equal(rule.mode(x_new), mode):
                acc = acc + 0.5 * s * (a_start + rule.coefficients(x_new, mode))
                t, x = t_end, x_new
                break
            count += 1
            if count > MAX_EVENTS_PER_STEP:
                raise IntegrationError(f"more than {MAX_EVENTS_PER_STEP} switches in one step near t = {t:.6g}")
            lo, hi = 0.0, s
            while hi - lo > EVENT_RESOLUTION:
                mid = 0.5 * (lo + hi)
                if np.array_equal(rule.mode(step(x, mid, mode)), mode):
                    lo = mid
                else:
                    hi = mid
            x_hi = step(x, hi, mode)
            if lo > 0:
                x_lo = step(x, lo, mode)
                a_lo = rule.coefficients(x_lo, mode)
                acc = acc + 0.5 * lo * (a_start + a_lo)
                record(t + lo, x_lo)
            else:
                a_lo = a_start
            acc = acc + 0.5 * (hi - lo) * (a_lo + rule.coefficients(x_hi, mode))
            if t + hi >= t_end:
                t, x = t_end, x_hi
            else:
                t, x = t + hi, x_hi
            events.append(float(t))
            record(t, x)
        if sample[k + 1]:
            record(t_end, x)
    return Trajectory(np.array(times), np.array(states), np.array(integrals), tuple(events))


# ---------------------------------------------------------------------------
# checks on trajectories


def coefficient_samples(tr: Trajectory, sc: Scenario, left: bool = False) -> np.ndarray:
    """Coefficient matrices at every sample, ``(N, n, n)``."""
    sched = sc.schedule
    if sched.endogenous:
        return np.array([sched.evaluate(t, x) for t, x in zip(tr.times, tr.states)])
    return sched.evaluate_many(tr.times, left=left)


def velocities(a: np.ndarray, states: np.ndarray) -> np.ndarray:
    """``v_i = sum_j a_ij (x_j - x_i)`` for stacks of matrices and states."""
    return np.einsum("kij,kj->ki", a, states) - a.sum(axis=2) * states


def velocity_pairs(tr: Trajectory, sc: Scenario) -> tuple[np.ndarray, np.ndarray]:
    """Integrand values at each sample seen from the right and from the left."""
    right = velocities(coefficient_samples(tr, sc), tr.states)
    if sc.schedule.endogenous:
        return right, right
    return right, velocities(coefficient_samples(tr, sc, left=True), tr.states)


def residual_check(tr: Trajectory, sc: Scenario, quadrature: str = "trapezoid") -> float:
    """``max_{i,t} |x_i(t) - x_i(0) - int_0^t v_i|`` with the integral by quadrature.

    The integrand is re-evaluated from the schedule at the samples, so the
    result is independent of the integrator.  ``"trapezoid"`` uses one-sided
    limits at interval ends; ``"simpson"`` (cumulative Simpson, smooth
    schedules only) is fourth order and is what an integrator order check
    needs.
    """
    right, left = velocity_pairs(tr, sc)
    dt = np.diff(tr.times)[:, None]
    if quadrature == "trapezoid":
        incr = 0.5 * dt * (right[:-1] + left[1:])
        integral = np.vstack([np.zeros(tr.n), np.cumsum(incr, axis=0)])
    elif quadrature == "simpson":
        from scipy.integrate import cumulative_simpson

        integral = cumulative_simpson(right, x=tr.times, axis=0, initial=0.0)
    else:
        raise ValueError(f"unknown quadrature {quadrature!r}")
    return float(np.max(np.abs(tr.states - tr.states[0] - integral)))


def range_excursion(tr: Trajectory) -> float:
    """How far any sample leaves ``[min x(0), max x(0)]`` (0 when inside)."""
    lo, hi = tr.states[0].min(), tr.states[0].max()
    return float(max(0.0, lo - tr.states.min(), tr.states.max() - hi))


def accumulate_ratio_growth(tr: Trajectory, sc: Scenario) -> np.ndarray:
    """Per ordered pair, ``max_t a_ij(t) / a_ji(t)`` over samples (0/0 -> 1, x/0 -> inf)."""
    a = coefficient_samples(tr, sc)
    b = np.swapaxes(a, 1, 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(a == 0, 1.0, np.where(b == 0, np.inf, a / b))
    out = r.max(axis=0)
    np.fill_diagonal(out, 1.0)
    return out


def oscillation_spread(tr: Trajectory, frac: float = 0.2) -> np.ndarray:
    """Per-agent ``max - min`` over the last ``frac`` of the horizon."""
    tail = tr.states[tr.times >= tr.times[-1] * (1 - frac)]
    return tail.max(axis=0) - tail.min(axis=0)


# ---------------------------------------------------------------------------
# named experiments


def example1_closed_form(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    return np.stack([3 + np.exp(-t), np.sin(t), -3 - np.exp(-t)], axis=-1)


def example1_scenario(horizon: float = 50.0, h: float = 1e-3, stride: int = 1) -> Scenario:
    return Scenario(3, ClosedForm("example1"), np.array([4.0, 0.0, -4.0]), horizon,
                    IntegratorSettings("rk4", h, 1e-6), stride)


@dataclass(frozen=True, eq=False)
class Example1Result:
    trajectory: Trajectory
    max_deviation: float        # vs the closed-form solution
    spread_x2: float            # oscillation of x_2 over the final 20%
    ratio_a21_a12: np.ndarray   # a_21/a_12 at each sample

    @property
    def nonconvergent(self) -> bool:
        return self.spread_x2 >= 1.9


def run_example1(horizon: float = 50.0, h: float = 1e-3) -> Example1Result:
    sc = example1_scenario(horizon, h)
    tr = integrate(sc)
    dev = float(np.max(np.abs(tr.states - example1_closed_form(tr.times))))
    a = coefficient_samples(tr, sc)
    return Example1Result(tr, dev, float(oscillation_spread(tr)[1]), a[:, 1, 0] / a[:, 0, 1])


def example2_scenario(x0, horizon: float = 5.0, h: float = 1e-3) -> Scenario:
    return Scenario(4, Endogenous("example2", {}, 4), np.asarray(x0, dtype=float), horizon,
                    IntegratorSettings("rk4", h, 1e-6))


@dataclass(frozen=True, eq=False)
class Example2Result:
    trajectory: Trajectory
    merge_time: float
    limits: np.ndarray


def run_example2(x0, horizon: float = 5.0, h: float = 1e-3) -> Example2Result:
    """Pairs (1,3) and (2,4) attract while strictly ordered; frozen after agents 2, 3 meet."""
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (4,):
        raise ValueError("example 2 needs exactly 4 agents")
    if np.any(np.diff(x0) < 0):
        raise ValueError("example 2 needs a sorted initial vector")
    sc = example2_scenario(x0, horizon, h)
    tr = integrate(sc)
    if not np.all(np.diff(x0) > 0):
        merge = 0.0
    elif tr.events:
        merge = tr.events[0]
    else:
        merge = math.inf
    return Example2Result(tr, merge, tr.final.copy())


def t_quarter_scenario(m: int, n: int, tail_budget: float, horizon: float = 20.0,
                       h: float = 1e-2, inner: float = 1.0, rate: float = 1.0) -> Scenario:
    sched = ClosedForm("t-quarter", {"m": m, "n": n, "budget": tail_budget, "inner": inner, "rate": rate})
    x0 = (np.arange(n) >= m).astype(float)
    return Scenario(n, sched, x0, horizon, IntegratorSettings("rk4", h, 1e-6))


@dataclass(frozen=True, eq=False)
class SeparationCertificate:
    trajectory: Trajectory
    tail_budget: float
    max_v1: float
    min_v2: float
    tol: float

    @property
    def holds(self) -> bool:
        return self.max_v1 <= 0.25 + self.tol and self.min_v2 >= 0.75 - self.tol


def run_t_quarter_experiment(m: int, n: int, tail_budget: float, horizon: float = 20.0,
                             h: float = 1e-2, inner: float = 1.0, rate: float = 1.0,
                             tol: float = 1e-6) -> SeparationCertificate:
    """V1 = agents 0..m-1 start at 0, V2 at 1, cross-group tail integral = budget."""
    if tail_budget > 0.25:
        raise ValueError(f"cross-group tail budget {tail_budget} exceeds 1/4")
    sc = t_quarter_scenario(m, n, tail_budget, horizon, h, inner, rate)
    group = np.arange(n) < m
    budget = sc.schedule.cross_tail_budget(group, 0.0)
    tr = integrate(sc)
    return SeparationCertificate(tr, budget, float(tr.states[:, :m].max()),
                                 float(tr.states[:, m:].min()), tol)

