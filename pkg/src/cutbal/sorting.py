"""Sorted view of a trajectory and the weighted sums S_m(t) = sum_{i<=m} K^-i y_i(t)."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .balance import minimal_K_many
from .dynamics import coefficient_samples, velocity_pairs
from .scenario import Scenario, Trajectory


class CutBalanceWarning(UserWarning):
    """K is below the cut-balance constant observed at some sample."""


def sort_permutation(x) -> np.ndarray:
    """Indices of x in increasing order, ties broken by the smaller index."""
    return np.argsort(np.asarray(x, dtype=float), kind="stable")


@dataclass(frozen=True, eq=False)
class SortedView:
    p: np.ndarray
    y: np.ndarray
    b: np.ndarray


def sorted_view(x, a) -> SortedView:
    """``y_i = x_{p_i}`` and ``b_ij = a_{p_i p_j}``."""
    x = np.asarray(x, dtype=float)
    a = np.asarray(a, dtype=float)
    p = sort_permutation(x)
    return SortedView(p, x[p], a[np.ix_(p, p)])


def sampled_minimal_K(tr: Trajectory, sc: Scenario) -> np.ndarray:
    """Minimal cut-balance constant of the schedule at every sample."""
    return minimal_K_many(coefficient_samples(tr, sc))


def weighted_sum_series(tr: Trajectory, sc: Scenario, K: float, *, check: bool = True) -> np.ndarray:
    """``S[k, m-1] = sum_{i<=m} K^-i y_i(t_k)`` for m = 1..n.

    With ``check`` the sampled cut-balance constants are compared against
    ``K`` and a :class:`CutBalanceWarning` is issued if K is too small.
    """
    if not (math.isfinite(K) and K >= 1):
        raise ValueError(f"K must be finite and >= 1, got {K}")
    if check:
        ks = sampled_minimal_K(tr, sc)
        worst = float(ks.max())
        if worst > K * (1 + 1e-12):
            warnings.warn(f"K = {K:g} is below the sampled cut-balance constant {worst:g}; "
                          "S_m need not be monotone", CutBalanceWarning, stacklevel=2)
    y = np.sort(tr.states, axis=1)
    w = float(K) ** -np.arange(1, tr.n + 1)
    return np.cumsum(y * w, axis=1)


@dataclass(frozen=True)
class MonotonicityResult:
    ok: bool
    worst_violation: float   # largest drop S(t_k) - S(t_{k+1}); 0 if none
    m: int | None = None     # 1-based series index of the worst drop
    time: float | None = None


def monotonicity_check(series: np.ndarray, slack: float, times=None) -> MonotonicityResult:
    """True iff no series drops by more than ``slack`` between consecutive samples."""
    s = np.asarray(series, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    if s.shape[0] < 2:
        return MonotonicityResult(True, 0.0)
    drop = s[:-1] - s[1:]
    k, m = np.unravel_index(np.argmax(drop), drop.shape)
    worst = max(0.0, float(drop[k, m]))
    t = None if times is None else float(times[k + 1])
    return MonotonicityResult(worst <= slack, worst, int(m) + 1 if worst > 0 else None,
                              t if worst > 0 else None)


def sorted_evolution_residual(tr: Trajectory, sc: Scenario) -> float:
    """Max residual of ``y_i(t) = y_i(0) + int_0^t v_{p_i(s)}(s) ds`` at the samples.

    The unsorted velocity ``v`` is continuous between breakpoints while the
    permutation jumps at crossings, so each sample interval is split at the
    crossing instants of the linearly interpolated states and the integrand
    is interpolated linearly on each piece.
    """
    right, left = velocity_pairs(tr, sc)
    x, t = tr.states, tr.times
    perms = np.argsort(x, axis=1, kind="stable")
    y = np.take_along_axis(x, perms, axis=1)
    dt = np.diff(t)
    rows = np.arange(len(t) - 1)[:, None]
    incr = 0.5 * dt[:, None] * (right[:-1] + left[1:])[rows, perms[:-1]]
    changed = np.nonzero(np.any(perms[:-1] != perms[1:], axis=1))[0]
    for k in changed:
        x0, x1 = x[k], x[k + 1]
        d0 = x0[:, None] - x0[None, :]
        d1 = x1[:, None] - x1[None, :]
        flip = (d0 * d1 < 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = d0[flip] / (d0[flip] - d1[flip])
        splits = np.unique(np.concatenate([[0.0, 1.0], frac[(frac > 0) & (frac < 1)]]))
        va, vb = right[k], left[k + 1]
        total = np.zeros(tr.n)
        for u, w in zip(splits, splits[1:]):
            pm = sort_permutation(x0 + 0.5 * (u + w) * (x1 - x0))
            vu = va + u * (vb - va)
            vw = va + w * (vb - va)
            total += 0.5 * (w - u) * dt[k] * (vu[pm] + vw[pm])
        incr[k] = total
    integral = np.vstack([np.zeros(tr.n), np.cumsum(incr, axis=0)])
    return float(np.max(np.abs(y - y[0] - integral)))
