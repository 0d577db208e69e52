"""Cut-balance verification and its sufficient conditions.

Cuts are enumerated exhaustively.  A cut is an unordered pair {S, S^c}; it is
stored as the bitmask of the side that excludes the last agent, so there are
``2**(n-1) - 1`` of them.  Bit ``i`` of a mask stands for agent ``i``
(0-based).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MAX_EXHAUSTIVE_N = 24
EPS_ZERO = 1e-12
_CHUNK = 1 << 16
# fwd <= K * rev is tested with this relative slack so that the K computed as
# fwd / rev verifies on the same sums despite one rounding in each direction
_REL_SLACK = 4 * np.finfo(float).eps


class CutEnumerationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CutReport:
    """Per-cut flows for one coefficient matrix."""

    n: int
    masks: np.ndarray     # (C,) int64 bitmasks
    forward: np.ndarray   # sum_{i in S, j notin S} a_ij
    reverse: np.ndarray   # sum_{i in S, j notin S} a_ji
    minimal_K: float      # inf when infeasible
    violating_cut: int | None = None

    @property
    def ratio(self) -> np.ndarray:
        """max(fwd/rev, rev/fwd) per cut: 1 for 0/0, inf for x/0."""
        f, r = self.forward, self.reverse
        hi, lo = np.maximum(f, r), np.minimum(f, r)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(hi == 0, 1.0, np.where(lo == 0, np.inf, hi / lo))
        return out

    @property
    def feasible(self) -> bool:
        return math.isfinite(self.minimal_K)

    def members(self, mask: int) -> tuple[int, ...]:
        return tuple(i for i in range(self.n) if mask >> i & 1)


def _check_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if np.any(a < 0):
        raise ValueError("coefficients must be nonnegative")
    return a


def cut_flows(a, eps_zero: float = EPS_ZERO) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Masks and the forward/reverse flow of every cut of ``a``.

    Diagonal entries never cross a cut and are ignored.  Sums below
    ``eps_zero`` are set to exactly 0.
    """
    a = _check_matrix(a)
    n = a.shape[0]
    if n > MAX_EXHAUSTIVE_N:
        raise CutEnumerationError(f"n = {n} exceeds the exhaustive limit {MAX_EXHAUSTIVE_N}")
    a = a.copy()
    np.fill_diagonal(a, 0.0)
    count = (1 << (n - 1)) - 1
    masks = np.arange(1, count + 1, dtype=np.int64)
    fwd = np.empty(count)
    rev = np.empty(count)
    bits = np.arange(n, dtype=np.int64)
    for lo in range(0, count, _CHUNK):
        m = masks[lo:lo + _CHUNK]
        s = ((m[:, None] >> bits) & 1).astype(float)
        out = 1.0 - s
        fwd[lo:lo + len(m)] = ((s @ a) * out).sum(axis=1)
        rev[lo:lo + len(m)] = ((s @ a.T) * out).sum(axis=1)
    fwd[fwd < eps_zero] = 0.0
    rev[rev < eps_zero] = 0.0
    return masks, fwd, rev


def _report(a, eps_zero: float, K: float | None) -> tuple[bool, CutReport]:
    a = _check_matrix(a)
    n = a.shape[0]
    if n == 1:
        empty = np.zeros(0)
        return True, CutReport(1, np.zeros(0, dtype=np.int64), empty, empty, 1.0)
    masks, fwd, rev = cut_flows(a, eps_zero)
    hi, lo = np.maximum(fwd, rev), np.minimum(fwd, rev)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(hi == 0, 1.0, np.where(lo == 0, np.inf, hi / lo))
    minimal = max(1.0, float(ratio.max()))
    if K is None:
        bad = ~np.isfinite(ratio)
    else:
        bad = hi > K * lo * (1 + _REL_SLACK)
    violating = int(masks[np.argmax(bad)]) if bad.any() else None
    return not bad.any(), CutReport(n, masks, fwd, rev, minimal, violating)


def verify_cut_balance(a, K: float, eps_zero: float = EPS_ZERO) -> tuple[bool, CutReport]:
    """Check ``K^-1 rev <= fwd <= K rev`` on every cut."""
    if not K >= 1:
        raise ValueError("K must be >= 1")
    return _report(a, eps_zero, K)


def minimal_cut_balance_K(a, eps_zero: float = EPS_ZERO) -> float:
    """Smallest feasible K (>= 1), or ``math.inf`` when some cut is one-way."""
    return _report(a, eps_zero, None)[1].minimal_K


def cut_report(a, eps_zero: float = EPS_ZERO) -> CutReport:
    return _report(a, eps_zero, None)[1]


_BATCH_N = 12


def minimal_K_many(stack, eps_zero: float = EPS_ZERO) -> np.ndarray:
    """Minimal K of each matrix in an ``(N, n, n)`` stack.

    Symmetric matrices short-cut to 1.  Up to ``_BATCH_N`` agents all cuts are
    evaluated for many matrices at once; beyond that the certified bound of
    the sufficient conditions is used when one exists (an upper bound), and
    exhaustive enumeration otherwise.
    """
    a = np.array(stack, dtype=float)
    if a.ndim != 3 or a.shape[1] != a.shape[2]:
        raise ValueError(f"expected a stack of square matrices, got shape {a.shape}")
    N, n = a.shape[0], a.shape[1]
    out = np.ones(N)
    if n == 1 or N == 0:
        return out
    idx = np.arange(n)
    a[:, idx, idx] = 0.0
    asym = np.nonzero(np.any(np.abs(a - np.swapaxes(a, 1, 2)) > eps_zero, axis=(1, 2)))[0]
    if asym.size == 0:
        return out
    if n <= _BATCH_N:
        count = (1 << (n - 1)) - 1
        masks = np.arange(1, count + 1, dtype=np.int64)
        s = ((masks[:, None] >> idx) & 1).astype(float)
        comp = 1.0 - s
        step = max(1, (1 << 22) // (n * n * count))
        for lo in range(0, asym.size, step):
            ks = asym[lo:lo + step]
            sub = a[ks]
            fwd = np.einsum("ci,kic->kc", s, sub @ comp.T)
            rev = np.einsum("ci,kic->kc", s, np.swapaxes(sub, 1, 2) @ comp.T)
            fwd[fwd < eps_zero] = 0.0
            rev[rev < eps_zero] = 0.0
            hi, low = np.maximum(fwd, rev), np.minimum(fwd, rev)
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(hi == 0, 1.0, np.where(low == 0, np.inf, hi / low))
            out[ks] = np.maximum(1.0, ratio.max(axis=1))
        return out
    for k in asym:
        bound = condition_profile(a[k], eps_zero).best_K()
        out[k] = bound if bound is not None else minimal_cut_balance_K(a[k], eps_zero)
    return out


# ---------------------------------------------------------------------------
# sufficient conditions


@dataclass(frozen=True)
class ConditionProfile:
    symmetric: bool
    type_symmetric_K: float | None
    average_preserving: bool
    preserving_weights: np.ndarray | None

    @property
    def weights_K(self) -> float | None:
        """Cut-balance constant implied by the preserving weights (max w / min w)."""
        if self.preserving_weights is None:
            return None
        w = self.preserving_weights
        return float(w.max() / w.min())

    def best_K(self) -> float | None:
        """Smallest K certified by any of the sufficient conditions."""
        cands = [k for k in (1.0 if self.symmetric else None, self.type_symmetric_K, self.weights_K)
                 if k is not None]
        return min(cands) if cands else None


def _type_symmetric_K(a: np.ndarray, eps_zero: float) -> float | None:
    off = ~np.eye(a.shape[0], dtype=bool)
    p = np.where(off & (a >= eps_zero), a, 0.0)
    q = p.T
    if np.any((p > 0) != (q > 0)):
        return None
    both = p > 0
    if not both.any():
        return 1.0
    return float(max(1.0, np.max(p[both] / q[both])))


def _strong_components(adj: np.ndarray) -> list[list[int]]:
    from .graph import InteractionGraph, strongly_connected_components

    n = adj.shape[0]
    edges = {(j, i) for i in range(n) for j in range(n) if i != j and adj[i, j]}
    return [list(b) for b in strongly_connected_components(InteractionGraph(n, edges)).blocks]


def preserving_weights(a, eps_zero: float = EPS_ZERO, tol: float = 1e-9) -> np.ndarray | None:
    """Positive ``w`` with ``w_i sum_j a_ij = sum_j w_j a_ji`` for all i, if one exists.

    ``w`` spans the null space of the transposed Laplacian.  A positive null
    vector exists iff no interaction leaves a strongly connected component
    (every weakly connected component is strongly connected); on each such
    component the null vector is unique up to scale and single-signed.  Each
    component's vector is normalised to max entry 1.
    """
    a = _check_matrix(a).copy()
    np.fill_diagonal(a, 0.0)
    a[a < eps_zero] = 0.0
    n = a.shape[0]
    comps = _strong_components(a > 0)
    comp_of = np.empty(n, dtype=int)
    for c, block in enumerate(comps):
        comp_of[block] = c
    if np.any((a > 0) & (comp_of[:, None] != comp_of[None, :])):
        return None
    w = np.zeros(n)
    for block in comps:
        if len(block) == 1:
            w[block] = 1.0
            continue
        sub = a[np.ix_(block, block)]
        lap_t = (np.diag(sub.sum(axis=1)) - sub).T
        _, sing, vt = np.linalg.svd(lap_t)
        v = vt[-1]
        v = v / v[np.argmax(np.abs(v))]
        if np.any(v < -tol) or np.any(np.abs(v) <= tol):
            return None
        w[block] = v
    scale = np.abs(a).max() if a.any() else 1.0
    resid = w * a.sum(axis=1) - a.T @ w
    if np.max(np.abs(resid)) > 1e-8 * scale:
        return None
    return w


def condition_profile(a, eps_zero: float = EPS_ZERO) -> ConditionProfile:
    a = _check_matrix(a)
    off = ~np.eye(a.shape[0], dtype=bool)
    b = np.where(off, a, 0.0)
    symmetric = bool(np.all(np.abs(b - b.T) <= eps_zero))
    k_type = 1.0 if symmetric else _type_symmetric_K(b, eps_zero)
    scale = max(1.0, float(np.abs(b).max(initial=0.0)))
    average = bool(np.allclose(b.sum(axis=1), b.sum(axis=0), rtol=0, atol=1e-9 * scale))
    if average:
        w = np.ones(a.shape[0])
    else:
        w = preserving_weights(b, eps_zero)
    return ConditionProfile(symmetric, k_type, average, w)


# ---------------------------------------------------------------------------
# Increment functional of the weighted sums S_m


def lemma1_functional(b, y, m: int, K: float) -> float:
    """``sum_{i<=m} K^-i sum_j b_ij (y_j - y_i)`` for a sorted vector ``y``.

    Indices in the weights are 1-based (the smallest value gets ``K^-1``).
    Nonnegative whenever ``b`` is cut-balanced with constant ``K``.
    """
    b = np.asarray(b, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(np.diff(y) < 0):
        raise ValueError("y must be sorted (nondecreasing)")
    n = y.size
    if not 1 <= m <= n:
        raise ValueError(f"m must lie in 1..{n}")
    w = float(K) ** -np.arange(1, m + 1)
    rates = b[:m] @ y - b[:m].sum(axis=1) * y[:m]
    return float(w @ rates)


def lemma1_flow_terms(b, m: int, K: float) -> np.ndarray:
    """``q_i = sum_j w_j b_ji - w_i sum_j b_ij`` with ``w_i = K^-i`` (i <= m), 0 beyond.

    The functional equals ``sum_i y_i q_i``.  Under cut balance ``sum_i q_i = 0``
    and every tail sum ``sum_{i>k} q_i >= 0``, which makes it nonnegative.
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    w = np.zeros(n)
    w[:m] = float(K) ** -np.arange(1, m + 1)
    return b.T @ w - w * b.sum(axis=1)


# ---------------------------------------------------------------------------
# generator


def generate_cut_balanced(n: int, K: float, density: float = 1.0, seed=0) -> np.ndarray:
    """Random matrix that is cut-balanced with constant ``K``.

    A symmetric sparsity pattern with symmetric base magnitudes in
    ``[0.2, 1]`` is drawn, then every entry is multiplied by its own factor in
    ``[K^-1/2, K^1/2]`` (log-uniform).  Each pair's ratio is then within
    ``[1/K, K]``, and summing over a cut keeps the bound.
    """
    if not K >= 1:
        raise ValueError("K must be >= 1")
    if not 0 < density <= 1:
        raise ValueError("density must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    upper = np.triu(rng.random((n, n)) < density, k=1)
    base = np.triu(rng.uniform(0.2, 1.0, (n, n)), k=1)
    pattern = upper | upper.T
    base = base + base.T
    half = 0.5 * math.log(K)
    factors = np.exp(rng.uniform(-half, half, (n, n)))
    a = np.where(pattern, base * factors, 0.0)
    np.fill_diagonal(a, 0.0)
    return a


def generate_weight_preserving(n: int, density: float = 0.6, spread: float = 4.0, seed=0) -> np.ndarray:
    """Random matrix preserving a positive weighted average (not type-symmetric in general).

    A random circulation ``c`` (sum of directed cycles) and weights
    ``w in [1, spread]`` give ``a_ij = c_ij / w_i``.
    """
    rng = np.random.default_rng(seed)
    c = np.zeros((n, n))
    for _ in range(max(1, int(round(density * n)))):
        k = int(rng.integers(2, n + 1))
        cyc = rng.permutation(n)[:k]
        amount = rng.uniform(0.2, 1.0)
        for u, v in zip(cyc, np.roll(cyc, -1)):
            c[u, v] += amount
    w = rng.uniform(1.0, spread, n)
    return c / w[:, None]
