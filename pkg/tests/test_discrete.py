import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cutbal.discrete import (
    InvalidStepError,
    certificate_chain,
    dt_contraction_certificate,
    dt_integrate,
    dt_run,
    dt_unbounded_graph,
    dt_validate,
    infer_alpha,
    one_way_cut,
    random_step,
    random_step_sequence,
    support_graph,
    uniform_step,
)
from cutbal.catalog import CATALOG
from cutbal.graph import check_weak_equals_strong
from cutbal.scenario import Trajectory


def brute_one_way(support):
    """Oracle: some subset sends influence out but receives none back."""
    n = support.shape[0]
    for r in range(1, n):
        for S in itertools.combinations(range(n), r):
            inside = np.zeros(n, dtype=bool)
            inside[list(S)] = True
            into = support[np.ix_(inside, ~inside)].any()   # S listens to outside
            out = support[np.ix_(~inside, inside)].any()    # outside listens to S
            if into != out:
                return True
    return False


def test_validate_examples():
    assert dt_validate(np.eye(3), 0.5).n == 3
    with pytest.raises(InvalidStepError, match="one-way cut") as err:
        dt_validate([[0.5, 0.5], [0.0, 1.0]], 0.5)
    assert err.value.subset in ((0,), (1,))
    assert uniform_step(4).alpha == 0.25


@pytest.mark.parametrize("a, alpha, msg", [
    ([[0.5, 0.6], [0.5, 0.5]], 0.1, "row 1"),
    ([[1.0, 0.0], [-0.1, 1.1]], 0.1, "negative"),
    ([[0.05, 0.95], [0.5, 0.5]], 0.1, "diagonal"),
    ([[0.95, 0.05], [0.05, 0.95]], 0.1, "below alpha"),
    ([[1.0]], 0.0, "alpha"),
    ([[1.0, 0.0]], 0.1, "square"),
])
def test_validate_rejects(a, alpha, msg):
    with pytest.raises(InvalidStepError, match=msg):
        dt_validate(a, alpha)


def test_exact_fractions():
    half = Fraction(1, 2)
    a = np.array([[half, half], [half, half]], dtype=object)
    run = dt_run([dt_validate(a, half)], np.array([Fraction(0), Fraction(1)], dtype=object), 1)
    assert list(run.trajectory.states[-1]) == [half, half]
    third = np.full((3, 3), Fraction(1, 3), dtype=object)
    third[0, 0] += Fraction(1, 10**30)  # exact arithmetic sees this
    with pytest.raises(InvalidStepError, match="not stochastic"):
        dt_validate(third, Fraction(1, 3))


def test_one_step_consensus():
    x0 = np.array([Fraction(v) for v in (3, -1, 7, 2)], dtype=object)
    run = dt_run([uniform_step(4, exact=True)], x0, 1)
    assert set(run.trajectory.states[-1]) == {Fraction(11, 4)}


def test_infer_alpha():
    assert infer_alpha([np.eye(2), np.array([[0.7, 0.3], [0.2, 0.8]])]) == 0.2
    with pytest.raises(InvalidStepError):
        infer_alpha([np.zeros((2, 2))])


def test_halving_certificate():
    a = np.full((2, 2), 0.5)
    run = dt_run([a] * 3, [0.0, 1.0], 3, alpha=0.5)
    cert = dt_contraction_certificate(run.trajectory, (0, 1), 0.5, 0)
    assert cert.t_end == 1 and cert.factor == 0.0 and cert.bound == 0.5


def test_lazy_certificate():
    a = np.array([[0.9, 0.1], [0.1, 0.9]])
    run = dt_run([a] * 12, [0.0, 1.0], 12, alpha=0.1)
    chain = certificate_chain(run.trajectory, (0, 1), 0.1)
    # spread shrinks by 0.8 a step; bound 0.9 is met after one step each time
    assert len(chain) == 12
    assert all(c.t_end == c.t_start + 1 and c.factor == pytest.approx(0.8) for c in chain)


def test_singleton_certificate():
    tr = Trajectory(np.arange(3.0), np.zeros((3, 2)))
    cert = dt_contraction_certificate(tr, (1,), 0.3, 0)
    assert cert.factor == 0.0 and cert.t_end == 1
    assert dt_contraction_certificate(tr, (0, 1), 0.3, 2) is None


def steps_from_pattern(active_at, length):
    on = np.array([[0.5, 0.5], [0.5, 0.5]])
    return [on if active_at(t) else np.eye(2) for t in range(length)]


@pytest.mark.parametrize("active_at, edge", [
    (lambda t: True, True),
    (lambda t: t < 3, False),
    (lambda t: t % 4 == 0, True),
])
def test_unbounded_graph(active_at, edge):
    g = dt_unbounded_graph(steps_from_pattern(active_at, 1000))
    assert (g.edges == {(0, 1), (1, 0)}) is edge
    assert g.rule["freq"] == 0.05


def test_unbounded_graph_short_history():
    with pytest.raises(ValueError, match="at least 10"):
        dt_unbounded_graph([np.eye(2)] * 9)


def test_direct_check_matches_graph_check():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n = int(rng.integers(2, 7))
        s = rng.random((n, n)) < rng.uniform(0.1, 0.6)
        np.fill_diagonal(s, False)
        want = brute_one_way(s)
        assert (one_way_cut(s) is not None) == want
        assert check_weak_equals_strong(support_graph(s))[0] is (not want)


@settings(max_examples=100, deadline=None)
@given(n=st.integers(1, 7), seed=st.integers(0, 10**6), alpha=st.sampled_from([0.01, 0.05, 0.1]))
def test_random_step_valid(n, seed, alpha):
    step = random_step(n, alpha, np.random.default_rng(seed))
    a = step.a
    assert np.all(np.abs(a.sum(axis=1) - 1) <= 1e-12)
    assert np.all(np.diag(a) >= alpha) and np.all(a[a > 0] >= alpha)
    assert np.array_equal(a > 0, (a > 0).T)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 6), seed=st.integers(0, 10**6))
def test_global_range_monotone(n, seed):
    steps = random_step_sequence(n, 0.1, 30, seed, density=0.3)
    x0 = np.random.default_rng(seed).uniform(-5, 5, n)
    x = dt_run(steps, x0, 30).trajectory.states
    slack = 1e-12 * np.abs(x0).max()
    assert np.all(np.diff(x.max(axis=1)) <= slack)
    assert np.all(np.diff(x.min(axis=1)) >= -slack)


def test_sequence_prefix_replays():
    a = random_step_sequence(4, 0.1, 5, 3)
    b = random_step_sequence(4, 0.1, 9, 3)
    assert all(np.array_equal(p.a, q.a) for p, q in zip(a, b))


def test_run_errors():
    with pytest.raises(ValueError, match="ended after 1"):
        dt_run([np.eye(2)], [0.0, 1.0], 2, alpha=0.5)
    with pytest.raises(ValueError, match="alpha"):
        dt_run([np.eye(2)], [0.0, 1.0], 1)
    with pytest.raises(InvalidStepError):
        dt_run([np.eye(3)], [0.0, 1.0], 1, alpha=0.5)


def test_components_isolated():
    # two pairs coupled only for the first 3 steps
    joined = np.full((4, 4), 0.25)
    apart = np.kron(np.eye(2), np.full((2, 2), 0.5))
    steps = [joined] * 3 + [apart] * 40
    run = dt_run(steps, [0.0, 1.0, 5.0, 9.0], 43, alpha=0.25)
    assert run.graph.edges == {(0, 1), (1, 0), (2, 3), (3, 2)}
    assert run.isolation[(0, 1)] == 3 and run.monotone


def test_catalog_discrete():
    run = dt_integrate(CATALOG["dt-random"].scenario())
    assert run.monotone and run.trajectory.discrete
    x = run.trajectory.states[-1]
    assert x.max() - x.min() <= 1e-8
    one = dt_integrate(CATALOG["dt-one-step"].scenario())
    assert np.ptp(one.trajectory.states[-1]) <= 1e-15
