import json

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import signal

from extpos.errors import AssumptionViolation, DimensionError, NoRelativeDegree
from extpos.lti import (
    LtiSystem,
    Trajectory,
    check_assumption1,
    check_assumptions,
    load_system,
    read_trajectory_csv,
    relative_degree,
    save_system,
    simulate,
    steady_state,
    write_trajectory_csv,
)

from .conftest import random_observable


def exact_rank(M):
    rows = [[sympy.nsimplify(float(v), rational=True) for v in row] for row in np.asarray(M)]
    return sympy.Matrix(rows).rank()


def test_zero_dynamics():
    sys = LtiSystem(np.eye(3) * 0.7, np.ones((3, 2)), np.ones((1, 3)))
    tr = simulate(sys, np.zeros(3), np.zeros((10, 2)))
    assert np.all(tr.outputs == 0)


def test_drone_hold_altitude(plant):
    tr = simulate(plant, [10, 0], np.zeros(30))
    np.testing.assert_allclose(tr.outputs.ravel(), 10.0)


def test_drone_constant_velocity(plant):
    tr = simulate(plant, [0, 1], np.zeros(25))
    # hand iteration: altitude gains 0.1 per step
    np.testing.assert_allclose(tr.outputs.ravel(), 0.1 * np.arange(25), atol=1e-12)


def test_output_does_not_see_current_input(plant):
    tr = simulate(plant, [0, 0], [5.0])
    assert tr.outputs[0, 0] == 0.0


def test_simulate_dimension_errors(plant):
    with pytest.raises(DimensionError):
        simulate(plant, [1, 2, 3], np.zeros(4))
    with pytest.raises(DimensionError):
        simulate(plant, [0, 0], np.zeros((4, 2)))
    with pytest.raises(DimensionError):
        simulate(plant, [0, 0], np.zeros((0, 1)))


def test_construction_checks():
    with pytest.raises(DimensionError):
        LtiSystem(np.ones((2, 3)), np.ones((2, 1)), np.ones((1, 2)))
    with pytest.raises(DimensionError):
        LtiSystem(np.eye(2), np.ones((3, 1)), np.ones((1, 2)))
    sys = LtiSystem([[0.5]], [[1.0]], [[1.0]])
    assert (sys.n, sys.m, sys.p) == (1, 1, 1)
    with pytest.raises(ValueError):
        sys.A[0, 0] = 2.0


def test_relative_degree_examples(plant):
    assert relative_degree(plant) == 2
    assert plant.d == 2
    assert relative_degree(LtiSystem([[0.5]], [[1.0]], [[1.0]])) == 1
    with pytest.raises(NoRelativeDegree):
        relative_degree(LtiSystem(np.eye(2), np.ones((2, 1)), np.zeros((1, 2))))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 5), st.integers(1, 2), st.integers(1, 2))
def test_relative_degree_matches_impulse_response(seed, n, m, p):
    rng = np.random.default_rng(seed)
    sys = random_observable(rng, n, m, p)
    d = relative_degree(sys)
    U = np.zeros((d + 2, m))
    U[0] = rng.standard_normal(m)
    y = simulate(sys, np.zeros(n), U).outputs
    assert np.allclose(y[:d], 0)
    if np.max(np.abs(sys.markov_parameter(d) @ U[0])) > 1e-9:
        assert np.max(np.abs(y[d])) > 0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 5), st.integers(1, 2), st.integers(1, 2), st.integers(1, 30))
def test_superposition(seed, n, m, p, T):
    rng = np.random.default_rng(seed)
    sys = random_observable(rng, n, m, p)
    a, b = rng.standard_normal(n), rng.standard_normal(n)
    u1, u2 = rng.standard_normal((T, m)), rng.standard_normal((T, m))
    y = simulate(sys, a + b, u1 + u2).outputs
    y12 = simulate(sys, a, u1).outputs + simulate(sys, b, u2).outputs
    np.testing.assert_allclose(y, y12, rtol=1e-10, atol=1e-10 * max(1.0, np.abs(y12).max()))


def test_drone_assumptions_match_exact_ranks(plant):
    rep = check_assumptions(plant)
    assert rep.ok and rep.failed() == []
    A, B, C = plant.A, plant.B, plant.C
    ros = np.block([[A - np.eye(2), B], [C, np.zeros((1, 1))]])
    assert exact_rank(ros) == rep.details["rosenbrock_rank_at_1"] == 3
    assert exact_rank(np.hstack([A - np.eye(2), B])) == 2
    assert exact_rank(plant.observability_matrix()) == 2


def test_unit_eigenvalue_without_input_not_stabilizable():
    rep = check_assumptions(LtiSystem([[1.0]], [[0.0]], [[1.0]]))
    assert not rep.stabilizable
    assert "stabilizable" in rep.failed()


def test_zero_at_one_detected():
    # strictly proper stand-in for (z-1)/(z-0.5): (z-1)/((z-0.5)(z-0.25))
    A, B, C, D = signal.tf2ss([1.0, -1.0], np.polymul([1.0, -0.5], [1.0, -0.25]))
    assert np.allclose(D, 0)
    sys = LtiSystem(A, B, C)
    rep = check_assumptions(sys)
    assert rep.no_invariant_zero_at_one is False
    ros = np.block([[A - np.eye(2), B], [C, np.zeros((1, 1))]])
    assert exact_rank(ros) < 3
    with pytest.raises(AssumptionViolation, match="steady-state equations have no solution"):
        steady_state(sys, [1.0])


def test_unobservable_reported():
    sys = LtiSystem(np.diag([0.5, 0.2]), np.ones((2, 1)), np.array([[1.0, 0.0]]))
    rep = check_assumptions(sys)
    assert not rep.observable and rep.details["observability_rank"] == 1


def test_steady_state_examples(plant):
    x, u = steady_state(plant, [0.0])
    assert np.allclose(x, 0) and np.allclose(u, 0)
    x, u = steady_state(plant, [5.0])
    np.testing.assert_allclose(x, [5.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(u, [0.0], atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 4), st.floats(-5, 5))
def test_steady_state_holds(seed, n, y):
    rng = np.random.default_rng(seed)
    sys = random_observable(rng, n, 1, 1)
    if not check_assumptions(sys).no_invariant_zero_at_one:
        return
    x, u = steady_state(sys, [y])
    tr = simulate(sys, x, np.tile(u, (40, 1)))
    np.testing.assert_allclose(tr.outputs.ravel(), y, atol=1e-9 * max(1, abs(y)) * 10)


def test_assumption1():
    assert check_assumption1([10, 10], 2)
    assert not check_assumption1([10, -1], 2)
    assert check_assumption1([0.0, -5.0], 1)
    assert not check_assumption1([-1e-3, 5.0], 1)
    with pytest.raises(DimensionError):
        check_assumption1([1.0], 2)


def test_system_json_roundtrip(tmp_path, plant):
    path = tmp_path / "sys.json"
    save_system(path, plant)
    again = load_system(path)
    assert np.array_equal(again.A, plant.A) and again.d == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"A": [[1]], "B": [[1]]}))
    with pytest.raises(DimensionError):
        load_system(bad)


def test_trajectory_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    tr = Trajectory(rng.standard_normal((7, 2)), rng.standard_normal((7, 1)))
    path = tmp_path / "t.csv"
    write_trajectory_csv(path, tr)
    assert path.read_text().splitlines()[0] == "t,u_0,u_1,y_0"
    back = read_trajectory_csv(path)
    assert np.array_equal(back.inputs, tr.inputs) and np.array_equal(back.outputs, tr.outputs)


def test_trajectory_length_check():
    with pytest.raises(DimensionError):
        Trajectory(np.zeros(3), np.zeros(4))
