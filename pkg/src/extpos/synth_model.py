"""Model-based synthesis of monotone-tracking behavioral gains.

Given the lifted system (Az, Bz, Cz) and decay rates lambda_i in [0, 1), find
M = M^T > 0 and N with

    [[M, Az M + Bz N], [(Az M + Bz N)^T, M]] > 0,
    C_i (Az M + Bz N) = lambda_i C_i M          (each output row i),

and return K = N M^{-1}. The first block makes Az + Bz K Schur; the equality
rows make each output error decay geometrically at rate lambda_i.

Because Cz Bz = 0, the equality rows cannot be met exactly by a nonsingular M
unless C_i Az = lambda_i C_i already. Feasible certificates therefore live near
the boundary of the PSD cone along a known subspace, and the solve is done in
coordinates that stretch that subspace (see ``monotone_subspace``).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from ._linalg import as_matrix, null_space, orth
from .behavioral import BehavioralSystem
from .errors import SpecError, SynthesisInfeasible
from .lmi import FEASIBLE, LmiProblem, SolverOptions, bmat, solve
from .simkit import monotonicity_check, spectral_radius

#: Scaling factors tried, in order, for the near-singular directions of M.
DELTA_LADDER = (1e-3, 3e-4, 1e-4, 3e-3, 3e-5)
#: Ladder search stops once the lambda eigenvalue is this close.
GOOD_ENOUGH = 1e-4
#: cond(M) above this is reported as a near-singular certificate.
NEAR_SINGULAR_COND = 1e8


def check_lambdas(lambdas, p=None) -> np.ndarray:
    lam = np.atleast_1d(np.asarray(lambdas, dtype=float)).ravel()
    if p is not None and lam.size != p:
        raise SpecError(f"need one lambda per output: got {lam.size}, p = {p}")
    bad = lam[(lam < 0) | (lam >= 1) | ~np.isfinite(lam)]
    if bad.size:
        raise SpecError(f"lambda must lie in [0, 1), got {bad.tolist()}")
    return lam


@dataclass
class SynthesisSpec:
    lambdas: tuple
    y_ss: np.ndarray | None = None
    options: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        self.lambdas = tuple(float(v) for v in check_lambdas(self.lambdas))
        if self.y_ss is not None:
            self.y_ss = np.atleast_1d(np.asarray(self.y_ss, dtype=float)).ravel()

    def target(self, p: int) -> np.ndarray:
        return np.zeros(p) if self.y_ss is None else self.y_ss


@dataclass
class GainResult:
    K: np.ndarray
    certificates: dict
    diagnostics: dict
    status: str
    method: str = "model"
    lambdas: tuple = ()
    monotonicity_enforced: bool = True

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "status": self.status,
            "lambdas": list(self.lambdas),
            "monotonicity_enforced": self.monotonicity_enforced,
            "K": self.K.tolist(),
            "certificates": {k: np.asarray(v).tolist() for k, v in self.certificates.items()},
            "diagnostics": _jsonable(self.diagnostics),
        }

    def to_json(self, **kw) -> str:
        kw.setdefault("indent", 2)
        return json.dumps(self.to_dict(), **kw)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def monotone_subspace(Az, Bz, Cz, lambdas, tol=1e-12) -> np.ndarray:
    """Orthonormal basis of the directions along which a feasible M must be small.

    For each output row, start from w = (C_i Az - lambda_i C_i)^T and apply Az^T
    until the chain picks up a component along Bz; the chain vectors span it.
    """
    Az, Bz, Cz = (np.asarray(X, dtype=float) for X in (Az, Bz, Cz))
    r = Az.shape[0]
    vecs = []
    for i, lam in enumerate(np.ravel(lambdas)):
        w = Cz[i] @ Az - lam * Cz[i]
        if not np.any(np.abs(w) > tol):
            continue
        for _ in range(r):
            vecs.append(w)
            if np.max(np.abs(Bz.T @ w)) > tol * max(1.0, np.max(np.abs(w))):
                break
            w = Az.T @ w
    if not vecs:
        return np.zeros((r, 0))
    return orth(np.array(vecs).T)


def congruence_scaling(S: np.ndarray, delta: float) -> np.ndarray:
    """T = [delta * S, S_perp]: shrinks the S directions by delta."""
    if S.shape[1] == 0:
        return np.eye(S.shape[0])
    return np.hstack([delta * S, null_space(S.T)])


def assemble_theorem2(beh: BehavioralSystem, spec: SynthesisSpec, relaxed: bool = False,
                      scaling: np.ndarray | None = None) -> LmiProblem:
    """Unsolved LMI problem for ``beh``; ``relaxed`` drops the monotonicity rows."""
    lam = check_lambdas(spec.lambdas, beh.p)
    r, m = beh.r, beh.m
    prob = LmiProblem(options=spec.options)
    M = prob.add_variable("M", (r, r), symmetric=True)
    N = prob.add_variable("N", (m, r))
    AMBN = beh.Az @ M + beh.Bz @ N
    Ti = None if scaling is None else np.linalg.inv(scaling)
    prob.add_psd(M, "M", congruence=Ti)
    prob.add_psd(bmat([[M, AMBN], [AMBN.T, M]]), "lyapunov",
                 congruence=None if Ti is None else np.kron(np.eye(2), Ti))
    if not relaxed:
        for i in range(beh.p):
            Ci = beh.Cz[i : i + 1]
            prob.add_equality(Ci @ AMBN - lam[i] * (Ci @ M), f"monotone[{i}]")
    if scaling is not None:
        prob.set_scaling("M", scaling)
        prob.set_scaling("N", scaling)
    return prob


def _recover_gain(N, M):
    try:
        return np.linalg.solve(M, N.T).T, False
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(M, N.T, rcond=None)[0].T, True


def closed_loop_diagnostics(beh: BehavioralSystem, K, lambdas) -> dict:
    """Quantities recomputed from K alone."""
    K = as_matrix(K, rows=beh.m, cols=beh.r, name="K")
    Acl = beh.Az + beh.Bz @ K
    eig = np.linalg.eigvals(Acl)
    lam = np.ravel(lambdas)
    rows = [float(np.max(np.abs(beh.Cz[i] @ Acl - lam[i] * beh.Cz[i]))) for i in range(beh.p)]
    nearest = [float(np.min(np.abs(eig - l))) for l in lam]
    return {
        "spectral_radius": spectral_radius(Acl),
        "stable": bool(spectral_radius(Acl) < 1),
        "monotone_row_residual": rows,
        "lambda_eigenvalue_distance": nearest,
        "closed_loop_eigenvalues": [[float(z.real), float(z.imag)] for z in eig],
    }


def _certificate_diagnostics(sol, Mname):
    M = sol.assignments[Mname]
    cond = float(np.linalg.cond(M))
    return {
        f"cond_{Mname}": cond,
        "near_singular": bool(cond > NEAR_SINGULAR_COND),
        "min_psd_eigenvalue": sol.residuals.min_eig,
        "max_equality_residual": sol.residuals.max_eq_residual,
        "psd_margin": sol.psd_margin,
        "eq_tol": sol.eq_tol,
        "solver": sol.solver_status,
    }


def solve_with_ladder(build, S, score=None, ladder=DELTA_LADDER, good_enough=GOOD_ENOUGH):
    """Solve at each scaling; return (solution, delta) of the best feasible one.

    ``score(solution)`` ranks feasible candidates (lower is better, None rejects);
    the search stops at the first score below ``good_enough``. Without a score the
    first feasible solution wins.
    """
    attempts = [None] if S.shape[1] == 0 else list(ladder)
    best, best_delta, best_score, fallback = None, None, np.inf, None
    for delta in attempts:
        T = None if delta is None else congruence_scaling(S, delta)
        sol = solve(build(T))
        if sol.status != FEASIBLE:
            if sol.residuals is not None and (fallback is None or sol.residuals.min_eig > fallback.residuals.min_eig):
                fallback = sol
            continue
        if score is None:
            return sol, delta
        val = score(sol)
        if val is not None and val < best_score:
            best, best_delta, best_score = sol, delta, val
        if best_score < good_enough:
            break
    if best is None:
        return fallback, None
    return best, best_delta


def _eigen_score(beh, Mname, Nname, lam, gain=None):
    """Worst distance from each lambda to the closed-loop spectrum; None if unstable."""

    def score(sol):
        if gain is None:
            K, _ = _recover_gain(sol.assignments[Nname], sol.assignments[Mname])
        else:
            K = gain(sol)
        diag = closed_loop_diagnostics(beh, K, lam)
        return max(diag["lambda_eigenvalue_distance"]) if diag["stable"] else None

    return score


def infeasible_family(build_relaxed) -> str:
    sol = solve(build_relaxed())
    return "equality" if sol.status == FEASIBLE else "psd"


def synthesize_model(beh: BehavioralSystem, spec: SynthesisSpec, relaxed: bool = False) -> GainResult:
    """Solve the model-based LMIs and return K = N M^{-1} with diagnostics.

    Raises:
        SynthesisInfeasible: no certificate at any scaling; ``family`` tells
            whether the Lyapunov block alone already fails.
    """
    lam = check_lambdas(spec.lambdas, beh.p)
    S = np.zeros((beh.r, 0)) if relaxed else monotone_subspace(beh.Az, beh.Bz, beh.Cz, lam)
    sol, delta = solve_with_ladder(lambda T: assemble_theorem2(beh, spec, relaxed, T), S,
                                   score=None if relaxed else _eigen_score(beh, "M", "N", lam))
    if sol is None or sol.status != FEASIBLE:
        family = "psd" if relaxed else infeasible_family(lambda: assemble_theorem2(beh, spec, True))
        report = None if sol is None or sol.residuals is None else sol.residuals.to_dict()
        raise SynthesisInfeasible(
            f"LMI infeasible ({family} constraints); residuals: {report}", family=family, solution=sol
        )
    M, N = sol.assignments["M"], sol.assignments["N"]
    K, lstsq = _recover_gain(N, M)
    diag = _certificate_diagnostics(sol, "M")
    diag.update(closed_loop_diagnostics(beh, K, lam))
    diag["gain_recovery_residual"] = float(np.max(np.abs(N - K @ M)))
    diag["scaling_delta"] = delta
    diag["gain_from_lstsq"] = lstsq
    return GainResult(K, {"M": M, "N": N}, diag, sol.status, "model", tuple(lam), not relaxed)


def _lifted_rel_degree(beh: BehavioralSystem) -> int:
    """Plant relative degree read off the lift (Cz z(t) = y(t-1), so one less than the lift's)."""
    mk = kernels.markov(beh.Az, beh.Bz, beh.Cz, 2 * beh.r + 2)
    for k in range(mk.shape[0]):
        if np.max(np.abs(mk[k])) > 1e-9:
            return max(k, 1)
    return 1


def monotonicity_canon(beh: BehavioralSystem):
    """Nonnegative held-output initial windows: one per output channel, plus all channels."""
    n, m, p = beh.n, beh.m, beh.p
    cases = []
    for i in range(p):
        y = np.zeros(p)
        y[i] = 1.0
        cases.append(np.concatenate([np.zeros(n * m), np.tile(y, n)]))
    if p > 1:
        cases.append(np.concatenate([np.zeros(n * m), np.ones(n * p)]))
    return cases


def verify_gain(beh: BehavioralSystem, K, spec: SynthesisSpec, horizon: int = 100, tol: float = 1e-6) -> dict:
    """Stability, monotone-row residuals and a simulated monotonicity verdict for K."""
    lam = check_lambdas(spec.lambdas, beh.p)
    K = as_matrix(K, rows=beh.m, cols=beh.r, name="K")
    report = closed_loop_diagnostics(beh, K, lam)
    Acl = beh.Az + beh.Bz @ K
    n, p = beh.n, beh.p
    d = _lifted_rel_degree(beh)
    verdicts = []
    zeros_in = np.zeros((horizon - n + 1, beh.m))
    for z0 in monotonicity_canon(beh):
        _, Yz = kernels.simulate(Acl, np.zeros_like(beh.Bz), beh.Cz, z0, zeros_in)
        window = z0[n * beh.m :].reshape(n, p)
        y = np.vstack([window, Yz[1:]])  # y(0..horizon) in deviation coordinates
        ok, at = monotonicity_check(y, np.zeros(p), start=n + d, tol=tol)
        verdicts.append({"window": z0.tolist(), "monotone": ok, "first_violation": at,
                         "min_output": float(y.min())})
    report["relative_degree"] = d
    report["monotone"] = bool(report["stable"] and all(v["monotone"] for v in verdicts))
    report["canon"] = verdicts
    report["horizon"] = horizon
    return report
