"""Direct data-driven synthesis from one recorded input-output trajectory.

No model is identified for the gain. The closed loop is represented through
the data: with [u_{n:T}; z_{n:T}] of full row rank, any K can be written as
K = u_{n:T} Q P^{-1} with z_{n:T} Q = P, and then Az + Bz K = z_{n+1:T+1} Q P^{-1}.
Only single-input single-output data is supported.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from ._linalg import matrix_rank, pinv
from .behavioral import BehavioralSystem, output_matrix
from .errors import DimensionError, RankConditionError, SynthesisInfeasible
from .lmi import FEASIBLE, LmiProblem, SolverOptions, bmat, solve
from .lti import LtiSystem, Trajectory, simulate
from .synth_model import (
    GainResult,
    _certificate_diagnostics,
    _eigen_score,
    _recover_gain,
    check_lambdas,
    closed_loop_diagnostics,
    monotone_subspace,
    solve_with_ladder,
)

log = logging.getLogger(__name__)


def hankel(signal, depth: int) -> np.ndarray:
    """Depth-L block Hankel matrix; column j stacks samples j..j+L-1, oldest on top.

    >>> hankel([1, 2, 3], 2)
    array([[1., 2.],
           [2., 3.]])
    """
    S = np.asarray(signal, dtype=float)
    S = S.reshape(-1, 1) if S.ndim == 1 else S
    L = int(depth)
    if L < 1 or L > S.shape[0]:
        raise DimensionError(f"Hankel depth {L} must be in [1, {S.shape[0]}]")
    cols = S.shape[0] - L + 1
    return np.array([S[j : j + L].ravel() for j in range(cols)]).T


def is_persistently_exciting(u, order: int) -> dict:
    """Full row rank m·L of the depth-L Hankel matrix of ``u``."""
    H = hankel(u, order)
    rank = matrix_rank(H)
    return {"satisfied": rank == H.shape[0], "rank": rank, "required": H.shape[0]}


@dataclass(frozen=True, eq=False)
class DataMatrices:
    u_future: np.ndarray
    z_now: np.ndarray
    z_next: np.ndarray
    n: int
    m: int
    p: int
    T: int

    @property
    def columns(self) -> int:
        return self.z_now.shape[1]

    def to_dict(self) -> dict:
        return {
            "n": self.n, "m": self.m, "p": self.p, "T": self.T,
            "u_future": self.u_future.tolist(), "z_now": self.z_now.tolist(), "z_next": self.z_next.tolist(),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def build_data_matrices(data: Trajectory, n: int) -> DataMatrices:
    """u_{n:T}, z_{n:T} and z_{n+1:T+1} from samples t = 0..T."""
    U, Y = data.inputs, data.outputs
    T = data.T
    if n < 1:
        raise DimensionError("n must be positive")
    if T < 2 * n:
        raise DimensionError(f"trajectory too short: T = {T} < 2n = {2 * n}")
    z_now = np.vstack([hankel(U[:T], n), hankel(Y[:T], n)])
    z_next = np.vstack([hankel(U[1:], n), hankel(Y[1:], n)])
    u_future = U[n:].T.copy()
    return DataMatrices(u_future, z_now, z_next, n, data.m, data.p, T)


def rank_condition(dm: DataMatrices) -> dict:
    rank = matrix_rank(np.vstack([dm.u_future, dm.z_now]))
    required = 2 * dm.n + 1
    siso = dm.m == 1 and dm.p == 1
    return {
        "rank": rank,
        "required": required,
        "satisfied": bool(siso and rank == required),
        "siso": siso,
        "mimo_bound": (dm.n + 1) * dm.m + dm.n,
    }


def identify_lift(dm: DataMatrices) -> BehavioralSystem:
    """Least-squares [Bz Az] = z_next [u; z_now]^+, used only for preconditioning and diagnostics."""
    m = dm.m
    BA = dm.z_next @ pinv(np.vstack([dm.u_future, dm.z_now]))
    return BehavioralSystem(BA[:, m:], BA[:, :m], output_matrix(dm.n, dm.m, dm.p), dm.n, dm.m, dm.p)


def assemble_data_lmi(dm: DataMatrices, lam: float, Cz, options: SolverOptions, relaxed=False,
                      scaling=None) -> LmiProblem:
    r, cols = dm.z_now.shape
    prob = LmiProblem(options=options)
    P = prob.add_variable("P", (r, r), symmetric=True)
    Q = prob.add_variable("Q", (cols, r))
    ZQ = dm.z_next @ Q
    Ti = None if scaling is None else np.linalg.inv(scaling)
    prob.add_psd(P, "P", congruence=Ti)
    prob.add_psd(bmat([[P, ZQ], [ZQ.T, P]]), "lyapunov",
                 congruence=None if Ti is None else np.kron(np.eye(2), Ti))
    prob.add_equality(dm.z_now @ Q - P, "consistency", native=True)
    if not relaxed:
        prob.add_equality(Cz @ ZQ - lam * (Cz @ P), "monotone")
    if scaling is not None:
        prob.set_scaling("P", scaling)
    # Q only matters through the row space of [u; z_now]
    prob.set_scaling("Q", scaling, left=pinv(np.vstack([dm.u_future, dm.z_now])))
    return prob


def synthesize_data(dm: DataMatrices, lam: float, Cz=None, options: SolverOptions | None = None,
                    relaxed: bool = False) -> GainResult:
    """Gain K = u_{n:T} Q P^{-1} from one SISO trajectory.

    Raises:
        RankConditionError: MIMO data, or [u_{n:T}; z_{n:T}] not of rank 2n+1.
        SynthesisInfeasible: no certificate found.
    """
    options = options or SolverOptions()
    lam = float(check_lambdas([lam])[0])
    rc = rank_condition(dm)
    if not rc["siso"]:
        raise RankConditionError(
            f"data-driven synthesis is SISO only (m = {dm.m}, p = {dm.p}); stacked data rank cannot reach "
            f"the required value for MIMO data (bound {rc['mimo_bound']})"
        )
    if not rc["satisfied"]:
        raise RankConditionError(
            f"data rank condition violated: rank [u; z] = {rc['rank']}, required {rc['required']}"
        )
    Cz = output_matrix(dm.n, dm.m, dm.p) if Cz is None else np.atleast_2d(np.asarray(Cz, dtype=float))
    ident = identify_lift(dm)
    S = np.zeros((dm.z_now.shape[0], 0)) if relaxed else monotone_subspace(ident.Az, ident.Bz, Cz, [lam])
    gain = lambda sol: _recover_gain(dm.u_future @ sol.assignments["Q"], sol.assignments["P"])[0]  # noqa: E731
    sol, delta = solve_with_ladder(lambda T: assemble_data_lmi(dm, lam, Cz, options, relaxed, T), S,
                                   score=None if relaxed else _eigen_score(ident, "P", "Q", [lam], gain))
    if sol is None or sol.status != FEASIBLE:
        family = "psd"
        if not relaxed and solve(assemble_data_lmi(dm, lam, Cz, options, True)).status == FEASIBLE:
            family = "equality"
        report = None if sol is None or sol.residuals is None else sol.residuals.to_dict()
        raise SynthesisInfeasible(f"data LMI infeasible ({family} constraints); residuals: {report}",
                                  family=family, solution=sol)
    P, Q = sol.assignments["P"], sol.assignments["Q"]
    uQ = dm.u_future @ Q
    K, lstsq = _recover_gain(uQ, P)
    diag = _certificate_diagnostics(sol, "P")
    diag.update(closed_loop_diagnostics(ident, K, [lam]))
    diag["gain_recovery_residual"] = float(np.max(np.abs(uQ - K @ P)))
    diag["consistency_residual"] = float(np.max(np.abs(dm.z_now @ Q - P)))
    diag["scaling_delta"] = delta
    diag["gain_from_lstsq"] = lstsq
    diag["rank_condition"] = rc
    return GainResult(K, {"P": P, "Q": Q}, diag, sol.status, "data", (lam,), not relaxed)


def generate_pe_data(sys: LtiSystem, T: int | None = None, seed: int = 0, x0=None, max_tries: int = 100):
    """One trajectory t = 0..T with i.i.d. uniform [-1, 1] input, PE of order 2n+1.

    Returns ``(trajectory, seed_used)``. A non-PE draw (probability zero) is
    redrawn with the next seed.
    """
    n, m = sys.n, sys.m
    T = 4 * n if T is None else int(T)
    if T < 4 * n:
        raise DimensionError(f"T = {T} is below 4n = {4 * n}")
    x0 = np.zeros(n) if x0 is None else x0
    for k in range(max_tries):
        rng = np.random.default_rng(seed + k)
        u = rng.uniform(-1.0, 1.0, (T + 1, m))
        if is_persistently_exciting(u, 2 * n + 1)["satisfied"]:
            if k:
                log.warning("seed %d gave a non-PE input; used seed %d", seed, seed + k)
            return simulate(sys, x0, u), seed + k
    raise DimensionError(f"no PE input found in {max_tries} draws")
