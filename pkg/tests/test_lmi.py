import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from extpos.errors import LmiError
from extpos.lmi import (
    FEASIBLE,
    INFEASIBLE,
    AffineExpr,
    LmiProblem,
    SolverOptions,
    bmat,
    solve,
    verify_solution,
)


def scalar_problem(a, **opts):
    """p > 0 and p - a^2 p > 0 (Lyapunov for x+ = a x)."""
    prob = LmiProblem(options=SolverOptions(**opts))
    p = prob.add_variable("p", (1, 1), symmetric=True)
    prob.add_psd(p, "p")
    prob.add_psd(p - a * a * p, "decay")
    return prob


def test_contractive_scalar_feasible():
    sol = solve(scalar_problem(0.5))
    assert sol.status == FEASIBLE
    assert verify_solution(scalar_problem(0.5), sol.assignments).passes(1e-10, 1e-6)


def test_expanding_scalar_infeasible():
    prob = LmiProblem()
    p = prob.add_variable("p", (1, 1), symmetric=True)
    prob.add_psd(p, "p")
    prob.add_psd(-(2.25 * p - p), "lyap")
    assert solve(prob).status == INFEASIBLE


def test_contradictory_equality():
    prob = LmiProblem(options=SolverOptions(psd_margin=1e-3, eq_tol=1e-6))
    p = prob.add_variable("p", (1, 1), symmetric=True)
    prob.add_psd(p, "p")
    prob.add_equality(p, "p=0")
    assert solve(prob).status == INFEASIBLE


def test_verifier_reports_violation():
    prob = scalar_problem(0.5)
    rep = verify_solution(prob, {"p": np.array([[-1.0]])})
    assert rep.psd_min_eig["p"] == pytest.approx(-1.0)
    assert not rep.passes(1e-10, 1e-6)


def test_verifier_equality_residual():
    prob = LmiProblem()
    X = prob.add_variable("X", (2, 2))
    prob.add_equality(X - np.eye(2), "X=I")
    rep = verify_solution(prob, {"X": np.eye(2) + 1e-12})
    assert rep.max_eq_residual <= 1.001e-12


def test_missing_assignment():
    with pytest.raises(LmiError, match="missing"):
        verify_solution(scalar_problem(0.5), {})


def test_unused_variable_is_ill_posed():
    prob = scalar_problem(0.5)
    prob.add_variable("q", (2, 2), symmetric=True)
    with pytest.raises(LmiError, match="ill-posed"):
        solve(prob)


def test_undeclared_and_shape_errors():
    prob = LmiProblem()
    X = AffineExpr.of_variable("X", (2, 2))
    with pytest.raises(LmiError):
        prob.add_psd(X, "X")
    prob.add_variable("X", (2, 2), symmetric=True)
    with pytest.raises(LmiError):
        prob.add_variable("X", (2, 2))
    with pytest.raises(LmiError):
        X + np.ones((3, 3))
    with pytest.raises(LmiError):
        SolverOptions(psd_margin=0)
    with pytest.raises(LmiError):
        SolverOptions(eq_tol=-1)


def test_affine_algebra_evaluates():
    rng = np.random.default_rng(0)
    A, B, V = rng.standard_normal((3, 3)), rng.standard_normal((3, 2)), rng.standard_normal((3, 3))
    N = rng.standard_normal((2, 3))
    Mx = AffineExpr.of_variable("M", (3, 3))
    Nx = AffineExpr.of_variable("N", (2, 3))
    E = A @ Mx + B @ Nx
    blk = bmat([[Mx, E], [E.T, Mx]])
    got = blk.evaluate({"M": V, "N": N})
    want = np.block([[V, A @ V + B @ N], [(A @ V + B @ N).T, V]])
    np.testing.assert_allclose(got, want)
    np.testing.assert_allclose((2.0 * Mx - V).evaluate({"M": V}), V)


def lyapunov_problem(A, margin=1e-6):
    n = A.shape[0]
    prob = LmiProblem(options=SolverOptions(psd_margin=margin))
    P = prob.add_variable("P", (n, n), symmetric=True)
    prob.add_psd(P, "P")
    prob.add_psd(bmat([[P, A @ P], [(A @ P).T, P]]), "lyap")
    return prob


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 1000), st.integers(1, 4))
def test_feasible_status_is_reverified(seed, n):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    A *= rng.uniform(0.1, 0.9) / np.max(np.abs(np.linalg.eigvals(A)))
    prob = lyapunov_problem(A)
    sol = solve(prob)
    assert sol.status == FEASIBLE
    rep = verify_solution(prob, sol.assignments)
    assert rep.min_eig >= prob.options.psd_margin * (1 - 1e-6)


def test_mutation_flips_status():
    A = np.array([[0.5, 0.2], [0.0, 0.3]])
    assert solve(lyapunov_problem(A)).status == FEASIBLE
    mutated = lyapunov_problem(A)
    mutated.psd_constraints[0].expr = -1.0 * mutated.psd_constraints[0].expr
    assert solve(mutated).status != FEASIBLE


def test_margin_monotonicity():
    A = np.array([[0.9, 0.5], [0.0, 0.8]])
    for eps in (1e-3, 1e-5, 1e-8):
        assert solve(lyapunov_problem(A, eps)).status == FEASIBLE


def test_json_dump():
    data = json.loads(scalar_problem(0.5).to_json())
    assert data["variables"][0]["name"] == "p"
    assert len(data["psd_constraints"]) == 2
    assert data["options"]["psd_margin"] == 1e-10


def test_scaling_changes_nothing_observable():
    A = np.array([[0.5, 0.2], [0.0, 0.3]])
    prob = lyapunov_problem(A)
    prob.set_scaling("P", np.diag([10.0, 0.1]))
    sol = solve(prob)
    assert sol.status == FEASIBLE
    assert verify_solution(lyapunov_problem(A), sol.assignments).passes(1e-6, 1e-6)
    with pytest.raises(LmiError):
        prob.set_scaling("P", np.eye(3))
