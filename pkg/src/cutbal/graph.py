"""Unbounded-interactions graph, its components, and limit-cluster comparison.

An edge ``(j, i)`` means agent j keeps influencing agent i (``a_ij`` has an
unbounded integral).  Agents are 0-based here; serialised outputs are
1-based.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .balance import EPS_ZERO
from .scenario import Trajectory


class NotConvergedError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class InteractionGraph:
    n: int
    edges: frozenset[tuple[int, int]]
    weights: dict = field(default_factory=dict)
    rule: dict = field(default_factory=dict)

    def __post_init__(self):
        edges = frozenset((int(j), int(i)) for j, i in self.edges)
        for j, i in edges:
            if i == j:
                raise ValueError("self-loops are not allowed")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge {(j, i)} outside 0..{self.n - 1}")
        object.__setattr__(self, "edges", edges)

    def successors(self, v: int) -> list[int]:
        return sorted(i for j, i in self.edges if j == v)

    def to_text(self) -> str:
        rule = " ".join(f"{k}={v}" for k, v in sorted(self.rule.items()))
        lines = [f"# classification_rule: {rule}" if rule else "# classification_rule: none",
                 f"# n={self.n} edges are 'j i weight' (agent j influences agent i, 1-based)"]
        for j, i in sorted(self.edges):
            lines.append(f"{j + 1} {i + 1} {self.weights.get((j, i), 1.0):.17g}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Partition:
    blocks: tuple[tuple[int, ...], ...]
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        blocks = tuple(sorted((tuple(sorted(b)) for b in self.blocks), key=lambda b: b[0] if b else -1))
        seen = [v for b in blocks for v in b]
        if any(len(b) == 0 for b in blocks) or len(seen) != len(set(seen)):
            raise ValueError("partition blocks must be nonempty and disjoint")
        if sorted(seen) != list(range(len(seen))):
            raise ValueError("partition blocks must cover 0..n-1")
        object.__setattr__(self, "blocks", blocks)

    @property
    def n(self) -> int:
        return sum(len(b) for b in self.blocks)

    def labels(self) -> np.ndarray:
        out = np.empty(self.n, dtype=int)
        for k, b in enumerate(self.blocks):
            out[list(b)] = k
        return out

    def one_based(self) -> list[list[int]]:
        return [[v + 1 for v in b] for b in self.blocks]

    def __str__(self) -> str:
        return "{" + ",".join("{" + ",".join(map(str, b)) + "}" for b in self.one_based()) + "}"


# ---------------------------------------------------------------------------


def classify_unbounded_edges(tr: Trajectory, growth_frac: float = 0.4,
                             eps_zero: float = EPS_ZERO) -> InteractionGraph:
    """Finite-horizon proxy for ``int_0^inf a_ij = inf``.

    Edge ``(j, i)`` is kept when the integral accrued over the second half of
    the horizon is at least ``growth_frac`` times the first-half accrual and
    the total exceeds ``eps_zero``.  Constants give ratio 1, integrable tails
    a ratio tending to 0.
    """
    if tr.integrals is None:
        raise ValueError("trajectory carries no accumulated integrals")
    times = tr.times
    half = 0.5 * times[-1]
    flat = tr.integrals.reshape(len(times), -1)
    mid = np.array([np.interp(half, times, col) for col in flat.T]).reshape(tr.n, tr.n)
    total = tr.integrals[-1]
    first = mid - tr.integrals[0]
    second = total - mid
    keep = (second >= growth_frac * first) & (total - tr.integrals[0] > eps_zero)
    np.fill_diagonal(keep, False)
    edges = {(j, i) for i, j in zip(*np.nonzero(keep))}
    weights = {(j, i): float(total[i, j]) for j, i in edges}
    rule = {"heuristic": "second-half/first-half accrual", "growth_frac": growth_frac,
            "eps_zero": eps_zero, "horizon": float(times[-1])}
    return InteractionGraph(tr.n, edges, weights, rule)


def strongly_connected_components(g: InteractionGraph) -> Partition:
    """Tarjan's algorithm, iterative, visiting nodes and successors in index order."""
    succ = [g.successors(v) for v in range(g.n)]
    index: dict[int, int] = {}
    low: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    blocks: list[tuple[int, ...]] = []
    counter = 0
    for root in range(g.n):
        if root in index:
            continue
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, pos = work[-1]
            if pos < len(succ[v]):
                work[-1] = (v, pos + 1)
                w = succ[v][pos]
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, 0))
                elif w in on_stack:
                    low[v] = min(low[v], index[w])
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                block = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    block.append(w)
                    if w == v:
                        break
                blocks.append(tuple(block))
    return Partition(tuple(blocks))


def weakly_connected_components(g: InteractionGraph) -> Partition:
    parent = list(range(g.n))

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for j, i in g.edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[int]] = {}
    for v in range(g.n):
        groups.setdefault(find(v), []).append(v)
    return Partition(tuple(tuple(b) for b in groups.values()))


def check_weak_equals_strong(g: InteractionGraph) -> tuple[bool, tuple[int, int] | None]:
    """Whether every weakly connected component is strongly connected.

    The witness is an edge between two different strong components (there is
    no path back along it), or None.
    """
    labels = strongly_connected_components(g).labels()
    for j, i in sorted(g.edges):
        if labels[i] != labels[j]:
            return False, (j, i)
    return True, None


def predict_clusters(g: InteractionGraph) -> Partition:
    """Connected components of g: agents predicted to share a limit."""
    weak = weakly_connected_components(g)
    ok, _ = check_weak_equals_strong(g)
    return Partition(weak.blocks, () if ok else ("theory precondition unmet",))


def trailing_spread(tr: Trajectory, frac: float = 0.1) -> np.ndarray:
    """Per-agent range of values over the last ``frac`` of the horizon."""
    start = tr.times[-1] * (1 - frac)
    tail = tr.states[tr.times >= start]
    return tail.max(axis=0) - tail.min(axis=0)


def is_converged(tr: Trajectory, tol: float, frac: float = 0.1) -> bool:
    return bool(np.all(trailing_spread(tr, frac) < 10 * tol))


def limit_partition(tr: Trajectory, merge_tol: float = 1e-4, tol: float = 1e-6) -> Partition:
    """Single-linkage grouping of the final values at distance ``merge_tol``.

    Requires the trailing-window criterion: every coordinate varies by less
    than ``10 * tol`` over the last 10% of the horizon.
    """
    if not is_converged(tr, tol):
        raise NotConvergedError("not converged: trailing-window spread "
                                f"{trailing_spread(tr).max():.3g} >= {10 * tol:.3g}")
    x = np.asarray(tr.final, dtype=float)
    order = np.argsort(x, kind="stable")
    blocks, cur = [], [int(order[0])]
    for a, b in zip(order, order[1:]):
        if x[b] - x[a] <= merge_tol:
            cur.append(int(b))
        else:
            blocks.append(tuple(cur))
            cur = [int(b)]
    blocks.append(tuple(cur))
    return Partition(tuple(blocks))


@dataclass(frozen=True)
class Comparison:
    verdict: str  # "equal" | "refinement" | "mismatch"
    witness: tuple[int, int] | None = None


def compare_partitions(predicted: Partition, observed: Partition) -> Comparison:
    """``refinement``: observation merges predicted blocks; ``mismatch``: it splits one."""
    if predicted.n != observed.n:
        raise ValueError(f"partition sizes differ: {predicted.n} vs {observed.n}")
    obs = observed.labels()
    for block in predicted.blocks:
        for v in block[1:]:
            if obs[v] != obs[block[0]]:
                return Comparison("mismatch", (block[0], v))
    if set(predicted.blocks) == set(observed.blocks):
        return Comparison("equal")
    return Comparison("refinement")
