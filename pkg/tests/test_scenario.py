import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cutbal.catalog import CATALOG
from cutbal.scenario import (
    IntegratorSettings,
    Scenario,
    ScenarioError,
    Trajectory,
    load_scenario,
    save_scenario,
    scenario_from_dict,
)
from cutbal.schedules import (
    ClosedForm,
    Endogenous,
    PiecewiseConstant,
    RandomMarkov,
    ScheduleError,
    evaluate_schedule,
)


def minimal_doc(**over):
    doc = {
        "version": "1",
        "n": 2,
        "horizon": 1.0,
        "x0": [0.0, 1.0],
        "schedule": {"kind": "piecewise-constant",
                     "pieces": [{"start": 0.0, "end": 1.0, "matrix": [[0, 1], [1, 0]]}]},
        "integrator": {"method": "rk4", "h": 0.01, "tol": 1e-6},
        "sampling": {"stride": 1},
        "seed": 0,
    }
    doc.update(over)
    return doc


def test_minimal_two_agent_config():
    sc = load_scenario(json.dumps(minimal_doc()))
    assert sc.n == 2
    assert isinstance(sc.schedule, PiecewiseConstant)
    a = sc.schedule.evaluate(0.5)
    assert np.array_equal(a, a.T)


def test_negative_coefficient_rejected():
    doc = minimal_doc()
    doc["schedule"]["pieces"][0]["matrix"] = [[0, -1], [1, 0]]
    with pytest.raises(ScenarioError, match="negative coefficient"):
        scenario_from_dict(doc)


def test_unknown_key_named():
    with pytest.raises(ScenarioError, match="unknown key 'colour'"):
        scenario_from_dict(minimal_doc(colour="red"))
    doc = minimal_doc()
    doc["integrator"]["order"] = 4
    with pytest.raises(ScenarioError, match="integrator.order"):
        scenario_from_dict(doc)


def test_bad_partition():
    doc = minimal_doc(horizon=2.0)
    doc["schedule"]["pieces"] = [
        {"start": 0.0, "end": 1.0, "matrix": [[0, 1], [1, 0]]},
        {"start": 1.5, "end": 2.0, "matrix": [[0, 1], [1, 0]]},
    ]
    with pytest.raises(ScenarioError, match="bad interval partition"):
        scenario_from_dict(doc)


@pytest.mark.parametrize("change, msg", [
    ({"x0": [0.0]}, "x0"),
    ({"horizon": -1.0}, "horizon"),
    ({"sampling": {"stride": 0}}, "stride"),
])
def test_invariant_violations(change, msg):
    doc = minimal_doc(**change)
    doc["schedule"] = {"kind": "closed-form", "model": "constant", "params": {"matrix": [[0, 1], [1, 0]]}}
    with pytest.raises(ScenarioError, match=msg):
        scenario_from_dict(doc)


def test_malformed_json():
    with pytest.raises(ScenarioError, match="not valid JSON"):
        load_scenario("{not json")
    with pytest.raises(ScenarioError):
        load_scenario("[1, 2]")


def test_example1_catalogue_config():
    sc = load_scenario(save_scenario(CATALOG["example1"].scenario()))
    assert isinstance(sc.schedule, ClosedForm) and sc.n == 3


def test_example1_matrix_at_zero():
    a = evaluate_schedule(ClosedForm("example1"), 0.0)
    expected = np.zeros((3, 3))
    expected[0, 1], expected[1, 0], expected[1, 2], expected[2, 1] = 1 / 4, 5 / 8, 3 / 8, 1 / 4
    np.testing.assert_allclose(a, expected, rtol=0, atol=1e-15)


def test_bounded_confidence_far_apart():
    rule = Endogenous("bounded-confidence", {"radius": 1.0}, 2)
    assert not evaluate_schedule(rule, 0.0, np.array([0.0, 2.0])).any()


def test_single_piece_is_constant():
    m = np.array([[0.0, 2.0], [0.5, 0.0]])
    sched = PiecewiseConstant.constant(m, 3.0)
    for t in (0.0, 1.3, 3.0):
        assert np.array_equal(evaluate_schedule(sched, t), m)


def test_evaluate_errors():
    sched = PiecewiseConstant.constant(np.zeros((2, 2)), 1.0)
    with pytest.raises(ScheduleError):
        evaluate_schedule(sched, 2.0, horizon=1.0)
    rule = Endogenous("bounded-confidence", {}, 3)
    with pytest.raises(ScheduleError):
        evaluate_schedule(rule, 0.0, np.zeros(2))
    with pytest.raises(ScheduleError):
        evaluate_schedule(rule, 0.0)


def test_evaluate_is_pure():
    sched = ClosedForm("example1")
    a, b = evaluate_schedule(sched, 1.7), evaluate_schedule(sched, 1.7)
    assert a.tobytes() == b.tobytes()
    with pytest.raises(ValueError):
        a[0, 1] = 3.0  # read-only view


def test_one_sided_limits_at_breakpoint():
    p, q = np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([[0.0, 3.0], [3.0, 0.0]])
    sched = PiecewiseConstant((0.0, 1.0, 2.0), (p, q))
    assert np.array_equal(sched.evaluate(1.0), q)
    assert np.array_equal(sched.evaluate(1.0, left=True), p)


def markov(seed):
    s0 = np.array([[0.0, 1.0], [1.0, 0.0]])
    s1 = np.array([[0.0, 2.0], [1.0, 0.0]])
    return RandomMarkov((s0, s1), np.array([[0.5, 0.5], [0.5, 0.5]]), 0.25, seed, 10.0)


def test_random_markov_reproducible():
    ts = np.linspace(0, 10, 401)
    assert np.array_equal(markov(3).evaluate_many(ts), markov(3).evaluate_many(ts))
    assert markov(3).path != markov(4).path


def test_random_markov_random_access():
    # keyed draws: the path prefix does not depend on the horizon
    long = RandomMarkov(markov(3).states, markov(3).transition, 0.25, 3, 20.0)
    assert long.path[:len(markov(3).path)] == markov(3).path


def test_roundtrip_catalogue():
    for entry in CATALOG.values():
        sc = entry.scenario()
        again = load_scenario(save_scenario(sc))
        assert again.to_config() == sc.to_config()
        assert again.fingerprint() == sc.fingerprint()


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(1, 4),
    h=st.floats(1e-4, 0.5),
    stride=st.integers(1, 20),
    seed=st.integers(0, 2**32 - 1),
    data=st.data(),
)
def test_roundtrip_property(n, h, stride, seed, data):
    vals = st.floats(0, 5, allow_nan=False)
    m = np.array(data.draw(st.lists(st.lists(vals, min_size=n, max_size=n), min_size=n, max_size=n)))
    np.fill_diagonal(m, 0.0)
    x0 = data.draw(st.lists(st.floats(-10, 10), min_size=n, max_size=n))
    sc = Scenario(n, PiecewiseConstant.constant(m, 2.0), np.array(x0), 2.0,
                  IntegratorSettings("euler", h, 1e-6), stride, seed)
    again = load_scenario(save_scenario(sc))
    assert again.to_config() == sc.to_config()
    assert np.array_equal(again.schedule.evaluate(1.0), sc.schedule.evaluate(1.0))


def test_trajectory_validation():
    with pytest.raises(ValueError):
        Trajectory(np.array([0.1, 0.2]), np.zeros((2, 1)))
    with pytest.raises(ValueError):
        Trajectory(np.array([0.0, 0.0]), np.zeros((2, 1)))


def test_discrete_mode_rejects_endogenous():
    with pytest.raises(ScenarioError):
        Scenario(2, Endogenous("bounded-confidence", {}, 2), np.zeros(2), 1.0, mode="discrete")
