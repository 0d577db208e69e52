import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cutbal.graph import (
    InteractionGraph,
    NotConvergedError,
    Partition,
    check_weak_equals_strong,
    classify_unbounded_edges,
    compare_partitions,
    limit_partition,
    predict_clusters,
    strongly_connected_components,
    weakly_connected_components,
)
from cutbal.scenario import Trajectory


def reach(n, edges):
    """Transitive closure by repeated squaring of the adjacency (oracle)."""
    r = np.eye(n, dtype=bool)
    for j, i in edges:
        r[j, i] = True
    for _ in range(n):
        r = r | ((r.astype(int) @ r.astype(int)) > 0)
    return r


graphs = st.integers(1, 7).flatmap(lambda n: st.tuples(
    st.just(n),
    st.sets(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)).filter(lambda e: e[0] != e[1]), max_size=20),
))


@settings(max_examples=300, deadline=None)
@given(graphs)
def test_scc_matches_reachability(g):
    n, edges = g
    r = reach(n, edges)
    labels = strongly_connected_components(InteractionGraph(n, edges)).labels()
    same = labels[:, None] == labels[None, :]
    assert np.array_equal(same, r & r.T)


@settings(max_examples=300, deadline=None)
@given(graphs)
def test_wcc_matches_reachability(g):
    n, edges = g
    und = edges | {(i, j) for j, i in edges}
    r = reach(n, und)
    labels = weakly_connected_components(InteractionGraph(n, edges)).labels()
    assert np.array_equal(labels[:, None] == labels[None, :], r)


@settings(max_examples=200, deadline=None)
@given(graphs)
def test_weak_equals_strong_oracle(g):
    n, edges = g
    graph = InteractionGraph(n, edges)
    ok, witness = check_weak_equals_strong(graph)
    want = set(weakly_connected_components(graph).blocks) == set(strongly_connected_components(graph).blocks)
    assert ok == want
    if not ok:
        j, i = witness
        assert (j, i) in edges and not reach(n, edges)[i, j]


def test_graph_examples():
    cycle = InteractionGraph(3, {(0, 1), (1, 2), (2, 0)})
    assert strongly_connected_components(cycle).blocks == ((0, 1, 2),)
    chain = InteractionGraph(3, {(0, 1), (1, 2)})
    assert len(strongly_connected_components(chain).blocks) == 3
    assert check_weak_equals_strong(chain)[0] is False
    two = InteractionGraph(4, {(0, 1), (1, 0), (2, 3), (3, 2)})
    assert str(predict_clusters(two)) == "{{1,2},{3,4}}"
    assert predict_clusters(chain).flags == ("theory precondition unmet",)
    with pytest.raises(ValueError):
        InteractionGraph(2, {(1, 1)})


def test_partition_validation():
    assert str(Partition(((2, 1), (0,)))) == "{{1},{2,3}}"
    with pytest.raises(ValueError):
        Partition(((0, 1), (1, 2)))
    with pytest.raises(ValueError):
        Partition(((0,), (2,)))


def test_compare_partitions():
    p = Partition(((0,), (1, 2), (3,)))
    assert compare_partitions(p, p).verdict == "equal"
    merged = Partition(((0,), (1, 2, 3)))
    assert compare_partitions(p, merged).verdict == "refinement"
    split = Partition(((0,), (1,), (2,), (3,)))
    res = compare_partitions(p, split)
    assert res.verdict == "mismatch" and res.witness == (1, 2)
    with pytest.raises(ValueError):
        compare_partitions(p, Partition(((0, 1),)))


def traj(times, states, integrals=None):
    return Trajectory(np.asarray(times, float), np.asarray(states, float),
                      None if integrals is None else np.asarray(integrals, float))


def test_limit_partition():
    t = np.linspace(0, 10, 101)
    x = np.tile([0.0, 0.5, 0.50005, 2.0], (101, 1))
    assert str(limit_partition(traj(t, x))) == "{{1},{2,3},{4}}"
    moving = x.copy()
    moving[:, 0] = np.sin(t)
    with pytest.raises(NotConvergedError):
        limit_partition(traj(t, moving))


def test_classify_edges():
    t = np.linspace(0, 10, 1001)
    ints = np.zeros((len(t), 3, 3))
    ints[:, 0, 1] = t                        # constant rate: unbounded
    ints[:, 1, 0] = 1 - np.exp(-t)           # integrable tail
    ints[:, 2, 0] = 1e-14 * t                # below eps_zero
    g = classify_unbounded_edges(traj(t, np.zeros((len(t), 3)), ints))
    assert g.edges == frozenset({(1, 0)})
    assert g.rule["growth_frac"] == 0.4
    text = g.to_text()
    assert text.startswith("# classification_rule:") and "\n2 1 10\n" in text
    with pytest.raises(ValueError):
        classify_unbounded_edges(traj(t, np.zeros((len(t), 3))))
