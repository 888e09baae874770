"""One test per acceptance criterion; each records a single pass/fail line."""
import time

import numpy as np
import pytest

from extpos.behavioral import equivalence_check, lift
from extpos.cli import main
from extpos.drone import INITIAL_STATES, K1, K2, K3, K4, LAMBDA, drone
from extpos.init_feasibility import (
    feasible_input_data,
    feasible_input_model,
    generate_ensemble,
    null_projection_rank,
)
from extpos.lmi import FEASIBLE, INFEASIBLE, LmiProblem, SolverOptions, solve, verify_solution
from extpos.lti import LtiSystem, read_trajectory_csv, save_system, simulate
from extpos.simkit import closed_loop_run, external_positivity_check
from extpos.synth_data import (
    assemble_data_lmi,
    build_data_matrices,
    generate_pe_data,
    hankel,
    is_persistently_exciting,
    rank_condition,
    synthesize_data,
)
from extpos.synth_model import SynthesisSpec, assemble_theorem2, synthesize_model

from .conftest import random_observable

TOL = 1e-6
SPEC = SynthesisSpec((LAMBDA,))


def landings(sys, K):
    """Stable, monotone and nonnegative from every initial state over 100 steps."""
    runs = [closed_loop_run(sys, K, 0.0, x0, horizon=100, tol=TOL).verdicts for x0 in INITIAL_STATES]
    ok = all(v["stable"] and v["monotone"] and v["nonnegative"] for v in runs)
    return ok, min(v["min_output"] for v in runs)


def lam_distance(sys, K):
    return float(np.min(np.abs(np.linalg.eigvals(lift(sys).closed_loop(K)) - LAMBDA)))


def _data_gain(T=8, seed=0):
    sys = drone()
    traj, _ = generate_pe_data(sys, T=T, seed=seed)
    return synthesize_data(build_data_matrices(traj, sys.n), LAMBDA)


def test_criterion_1_lifting_equivalence(acceptance):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    systems = []
    for _ in range(20):
        n, m, p = int(rng.integers(1, 6)), int(rng.integers(1, 3)), int(rng.integers(1, 3))
        systems.append(random_observable(rng, n, m, p, rho_max=1.0))
    systems.append(drone())
    for sys in systems:
        x0 = rng.standard_normal(sys.n)
        u = rng.uniform(-1, 1, (51, sys.m))
        worst = max(worst, equivalence_check(sys, lift(sys), x0, u, 50))
    elapsed = time.perf_counter() - t0
    acceptance("1 lifting equivalence", worst < 1e-8 and elapsed < 5.0,
               f"max deviation {worst:.2e} over 21 systems, {elapsed:.2f} s")


def test_criterion_2_drone_lift_values(acceptance):
    beh = lift(drone())
    Au, Ay = beh.Az[-1, :2], beh.Az[-1, 2:]
    err = max(np.max(np.abs(Au - [0.01, 0.0])), np.max(np.abs(Ay - [-1.0, 2.0])))
    acceptance("2 drone lift values", err < 1e-12, f"Au = {Au.tolist()}, Ay = {Ay.tolist()}, error {err:.1e}")


def test_criterion_3_rank_condition(acceptance, tmp_path):
    sysfile, csv = tmp_path / "drone.json", tmp_path / "data.csv"
    save_system(sysfile, drone())
    code = main(["gen-data", str(sysfile), "--T", "8", "--out", str(csv)])
    rc = rank_condition(build_data_matrices(read_trajectory_csv(csv), 2))
    rng = np.random.default_rng(0)
    mimo = LtiSystem(0.5 * np.eye(2), np.eye(2), np.eye(2))
    rc_mimo = rank_condition(build_data_matrices(simulate(mimo, np.zeros(2), rng.uniform(-1, 1, (21, 2))), 2))
    ok = code == 0 and rc["rank"] == 5 and rc["satisfied"] and not rc_mimo["satisfied"]
    acceptance("3 rank condition", ok, f"SISO rank {rc['rank']} (required 5); MIMO satisfied = {rc_mimo['satisfied']}")


def test_criterion_4_model_synthesis(acceptance):
    sys = drone()
    res = synthesize_model(lift(sys), SPEC)
    ok_syn, y_min = landings(sys, res.K)
    dist = lam_distance(sys, res.K)
    ok_k1, _ = landings(sys, K1)
    ok = res.diagnostics["spectral_radius"] < 1 and dist < 1e-3 and ok_syn and ok_k1
    acceptance("4 model-based synthesis", ok,
               f"rho {res.diagnostics['spectral_radius']:.3f}, |eig - 0.4| {dist:.1e}, min y {y_min:.2e}, "
               f"reference K1 passes = {ok_k1} (exact gain values are solver dependent)")


def test_criterion_5_data_synthesis(acceptance):
    sys = drone()
    res = _data_gain()
    model = synthesize_model(lift(sys), SPEC)
    ok_syn, _ = landings(sys, res.K)
    d_data, d_model = lam_distance(sys, res.K), lam_distance(sys, model.K)
    ok_k3, _ = landings(sys, K3)
    ok = res.diagnostics["spectral_radius"] < 1 and d_data < 1e-3 and d_model < 1e-3 and ok_syn and ok_k3
    acceptance("5 data-based synthesis", ok,
               f"|eig - 0.4| data {d_data:.1e}, model {d_model:.1e}; reference K3 passes = {ok_k3}")


def test_criterion_6_negative_controls(acceptance):
    sys = drone()
    beh = lift(sys)
    lines, ok = [], True
    for name, K in (("K2", K2), ("K4", K4)):
        y_min = closed_loop_run(sys, K, 0.0, [10.0, 0.0]).verdicts["min_output"]
        pos = external_positivity_check(beh.closed_loop(K), beh.Bz, beh.Cz).ok
        ok &= y_min < -1e-3 and not pos
        lines.append(f"{name} min y {y_min:.3f}, externally positive {pos}")
    acceptance("6 negative controls", ok, "; ".join(lines))


def test_criterion_7_feasible_inputs(acceptance):
    sys = drone()
    rng = np.random.default_rng(7)
    ens, _, _ = generate_ensemble(sys, seed=0)
    worst_m = worst_d = worst_agree = 0.0
    for _ in range(20):
        x0, v = rng.uniform(-10, 10, 2), rng.uniform(0, 20, 2)
        ys = []
        for u in (feasible_input_model(sys, x0, v), feasible_input_data(ens, x0, v)):
            U = np.vstack([u, np.zeros((sys.d, 1))])
            ys.append(simulate(sys, x0, U).outputs[sys.d : sys.n + sys.d].ravel())
        worst_m = max(worst_m, np.max(np.abs(ys[0] - v)))
        worst_d = max(worst_d, np.max(np.abs(ys[1] - v)))
        worst_agree = max(worst_agree, np.max(np.abs(ys[0] - ys[1])))
    ranks = [null_projection_rank(generate_ensemble(sys, seed=s)[0]) for s in range(10)]
    ok = worst_m <= 1e-8 and worst_d <= 1e-6 and worst_agree <= 1e-6 and all(r == sys.n for r in ranks)
    acceptance("7 feasible inputs", ok,
               f"model error {worst_m:.1e}, data error {worst_d:.1e}, agreement {worst_agree:.1e}, "
               f"ensemble ranks {sorted(set(ranks))}")


def test_criterion_8_property_suites(acceptance):
    rng = np.random.default_rng(8)
    checks = {}

    # PE and Hankel invariants
    ok = True
    for _ in range(20):
        L = int(rng.integers(1, 5))
        u = rng.uniform(-1, 1, 3 * L + 2)
        H = hankel(u, L)
        ok &= all(np.array_equal(H[:, j], u[j : j + L]) for j in range(H.shape[1]))
        ok &= is_persistently_exciting(u, L)["satisfied"] and not is_persistently_exciting(np.zeros_like(u), L)["satisfied"]
    checks["pe_hankel"] = ok

    # lifted output never sees the current input
    systems = [random_observable(rng, int(rng.integers(1, 5)), int(rng.integers(1, 3)), int(rng.integers(1, 3)))
               for _ in range(20)]
    checks["cb_zero"] = all(np.all(lift(s).Cz @ lift(s).Bz == 0) for s in systems)

    # every feasible solve re-verifies
    sound = True
    sys = drone()
    for relaxed in (False, True):
        res = synthesize_model(lift(sys), SPEC, relaxed=relaxed)
        prob = assemble_theorem2(lift(sys), SPEC, relaxed=relaxed)
        sound &= res.status == FEASIBLE and verify_solution(prob, res.certificates).passes(1e-10 / 2, 1e-6)
    traj, _ = generate_pe_data(sys, T=8)
    dm = build_data_matrices(traj, 2)
    res = synthesize_data(dm, LAMBDA)
    prob = assemble_data_lmi(dm, LAMBDA, lift(sys).Cz, SolverOptions())
    sound &= verify_solution(prob, res.certificates).passes(1e-10 / 2, 1e-6)
    checks["certificate_soundness"] = bool(sound)

    # replay determinism
    a = closed_loop_run(sys, K1, 0.0, [5.0, 10.0])
    b = closed_loop_run(sys, K1, 0.0, [5.0, 10.0])
    checks["replay"] = np.array_equal(a.trajectory.outputs, b.trajectory.outputs) and a.replay_residual() < 1e-9

    # solver/verifier mutation: a feasible problem flips once a row is contradicted
    prob = LmiProblem()
    X = prob.add_variable("X", (1, 1), symmetric=True)
    prob.add_psd(X, "pos")
    prob.add_psd(2.0 - X, "cap")
    first = solve(prob).status
    prob.add_psd(X - 3.0, "contradiction")
    checks["mutation"] = first == FEASIBLE and solve(prob).status == INFEASIBLE

    failed = [k for k, v in checks.items() if not v]
    acceptance("8 property suites", not failed, "all green" if not failed else f"failed: {failed}")


@pytest.mark.parametrize("seed", range(3))
def test_data_gain_seed_robustness(seed):
    res = _data_gain(seed=seed)
    assert landings(drone(), res.K)[0]
