"""Closed-loop runs on the true plant and the verdicts computed from them.

A run has two phases. For t < n the inputs come from a seed policy, because
the behavioral window is not filled yet. From t = n on, the controller is
u(t) = K (z(t) - z_ss) + u_ss.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .behavioral import lift, lift_steady_state
from .errors import AssumptionViolation, DimensionError, ExtPosError
from .lti import LtiSystem, Trajectory, steady_state

DEFAULT_TOL = 1e-6
#: Upper limit on the automatically chosen positivity horizon.
MAX_POSITIVITY_HORIZON = 20000


class UnstableClosedLoop(ExtPosError):
    pass


def spectral_radius(M) -> float:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1]:
        raise DimensionError(f"spectral radius needs a square matrix, got {M.shape}")
    return float(np.max(np.abs(np.linalg.eigvals(M)))) if M.size else 0.0


def monotonicity_check(y, y_ss, start: int = 0, tol: float = DEFAULT_TOL):
    """Monotone approach to ``y_ss`` without overshoot, and y >= -tol, from ``start`` on.

    Returns ``(ok, first_violation)`` with ``first_violation`` the time index of
    the first offending sample, or None.

    >>> monotonicity_check([10, 4, -0.5, 0.1], 0.0)
    (False, 2)
    """
    Y = np.asarray(y, dtype=float)
    Y = Y.reshape(-1, 1) if Y.ndim == 1 else Y
    if Y.shape[0] <= start:
        raise DimensionError(f"sequence of length {Y.shape[0]} does not extend past start = {start}")
    e = Y - np.broadcast_to(np.atleast_1d(np.asarray(y_ss, dtype=float)).ravel(), Y.shape[1:])
    if np.any(Y[start] < -tol):
        return False, int(start)
    for t in range(start, Y.shape[0] - 1):
        a, b = e[t], e[t + 1]
        grows = np.abs(b) > np.abs(a) + tol
        flips = ((a > tol) & (b < -tol)) | ((a < -tol) & (b > tol))
        if np.any(grows | flips | (Y[t + 1] < -tol)):
            return False, t + 1
    return True, None


def settling_estimate(rho: float, decay: float = 1e-3) -> int:
    """Steps for rho^k to fall below ``decay``."""
    if rho <= 0:
        return 1
    return max(1, math.ceil(math.log(decay) / math.log(rho)))


@dataclass
class PositivityReport:
    ok: bool
    min_impulse: float
    first_negative: int | None
    horizon: int
    tail_bound: float

    def to_dict(self) -> dict:
        return dict(ok=self.ok, min_impulse=self.min_impulse, first_negative=self.first_negative,
                    horizon=self.horizon, tail_bound=self.tail_bound)


def external_positivity_check(Acl, Bz, Cz, horizon: int | None = None, tol: float = 1e-9) -> PositivityReport:
    """Nonnegativity of Cz Acl^k Bz for k = 0..horizon.

    The default horizon is 20 settling estimates. ``tail_bound`` estimates the
    largest impulse coefficient beyond the horizon: ||Cz Acl^(H+1)|| times the
    largest ||Acl^k Bz|| seen so far.

    Raises:
        UnstableClosedLoop: spectral radius >= 1.
    """
    Acl = np.atleast_2d(np.asarray(Acl, dtype=float))
    rho = spectral_radius(Acl)
    if rho >= 1:
        raise UnstableClosedLoop(f"closed loop has spectral radius {rho:.6g} >= 1")
    if horizon is None:
        horizon = min(MAX_POSITIVITY_HORIZON, max(20 * settling_estimate(rho), Acl.shape[0]))
    mk = kernels.markov(Acl, Bz, Cz, horizon + 1)
    scale = max(1.0, float(np.max(np.abs(mk))))
    neg = np.nonzero(np.any(mk.reshape(horizon + 1, -1) < -tol * scale, axis=1))[0]
    # tail estimate
    V = np.asarray(Bz, dtype=float)
    peak = 0.0
    for _ in range(horizon + 1):
        peak = max(peak, float(np.linalg.norm(V, 2)))
        V = Acl @ V
    CA = np.asarray(Cz, dtype=float) @ np.linalg.matrix_power(Acl, horizon + 1)
    tail = float(np.linalg.norm(CA, 2) * peak)
    return PositivityReport(
        ok=neg.size == 0,
        min_impulse=float(mk.min()),
        first_negative=None if neg.size == 0 else int(neg[0]),
        horizon=int(horizon),
        tail_bound=tail,
    )


@dataclass
class ClosedLoopRun:
    trajectory: Trajectory
    seed_inputs: np.ndarray
    z_ss: np.ndarray
    u_ss: np.ndarray
    K: np.ndarray
    verdicts: dict
    metadata: dict = field(default_factory=dict)

    def replay_residual(self) -> float:
        """max |u(t) - K (z(t) - z_ss) - u_ss| over t >= n, from the recorded samples."""
        n = int(self.metadata["n"])
        U, Y = self.trajectory.inputs, self.trajectory.outputs
        worst = 0.0
        for t in range(n, self.trajectory.T + 1):
            z = np.concatenate([U[t - n : t].ravel(), Y[t - n : t].ravel()])
            worst = max(worst, float(np.max(np.abs(U[t] - self.K @ (z - self.z_ss) - self.u_ss))))
        return worst

    def to_dict(self) -> dict:
        return {
            "verdicts": self.verdicts,
            "metadata": self.metadata,
            "K": self.K.tolist(),
            "seed_inputs": self.seed_inputs.tolist(),
            "z_ss": self.z_ss.tolist(),
            "u_ss": self.u_ss.tolist(),
        }

    def write(self, directory, stem: str):
        """``<stem>.csv`` (t, u, y, x) and ``<stem>.json`` (verdicts and metadata)."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        tr = self.trajectory
        header = ["t"] + [f"u_{i}" for i in range(tr.m)] + [f"y_{i}" for i in range(tr.p)]
        nx = 0 if tr.states is None else tr.states.shape[1]
        header += [f"x_{i}" for i in range(nx)]
        with open(directory / f"{stem}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for t in range(tr.T + 1):
                vals = list(tr.inputs[t]) + list(tr.outputs[t]) + ([] if nx == 0 else list(tr.states[t]))
                w.writerow([str(t)] + [repr(float(v)) for v in vals])
        (directory / f"{stem}.json").write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        return directory / f"{stem}.csv", directory / f"{stem}.json"


def seed_inputs(sys: LtiSystem, x0, policy):
    """Inputs for t < n plus metadata. ``policy`` is "feasible", "zero" or an n×m array."""
    from .init_feasibility import default_target, verify_theorem1

    n, m = sys.n, sys.m
    if isinstance(policy, str) and policy == "feasible":
        x0 = np.asarray(x0, dtype=float).ravel()
        v = default_target(sys.C @ x0, n)
        rep = verify_theorem1(sys, x0, v)
        if not rep.ok:
            raise AssumptionViolation(
                f"seed policy 'feasible' fails the window condition: {rep.diagnostics.get('error', 'negative window')}"
            )
        return rep.witness, {"seed_policy": "feasible", "seed_target": v.tolist(), "assumption1": rep.assumption1}
    if isinstance(policy, str) and policy == "zero":
        return np.zeros((n, m)), {"seed_policy": "zero"}
    if isinstance(policy, str):
        raise DimensionError(f"unknown seed policy {policy!r}")
    u = np.asarray(policy, dtype=float).reshape(n, m)
    return u, {"seed_policy": "user"}


def closed_loop_run(sys: LtiSystem, K, y_ss=None, x0=None, seed_policy="feasible", horizon: int = 100,
                    tol: float = DEFAULT_TOL, start: int | None = None, lambdas=None,
                    positivity_horizon: int | None = None) -> ClosedLoopRun:
    """Simulate the plant under the seed window and then the behavioral feedback law.

    ``tol`` is scaled by max(1, |y(0)|). Monotonicity is judged from ``start``
    (default n + d).
    """
    n, m, p, d = sys.n, sys.m, sys.p, sys.d
    if horizon <= n + d:
        raise DimensionError(f"horizon must exceed n + d = {n + d}")
    K = np.atleast_2d(np.asarray(K, dtype=float))
    r = n * (m + p)
    if K.shape != (m, r):
        raise DimensionError(f"K must be {m}x{r}, got {K.shape}")
    y_ss = np.zeros(p) if y_ss is None else np.atleast_1d(np.asarray(y_ss, dtype=float)).ravel()
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).ravel()
    _, u_ss = steady_state(sys, y_ss)
    z_ss = lift_steady_state(u_ss, y_ss, n)
    u_seed, seed_meta = seed_inputs(sys, x0, seed_policy)
    X, U, Y = kernels.run_feedback(sys.A, sys.B, sys.C, K, x0, u_seed, z_ss, u_ss, horizon + 1, n)
    traj = Trajectory(U, Y, X)

    start = n + d if start is None else start
    scale = max(1.0, float(np.max(np.abs(Y[0]))))
    vtol = tol * scale
    mono, at = monotonicity_check(Y, y_ss, start, vtol)
    beh = lift(sys)
    Acl = beh.closed_loop(K)
    rho = spectral_radius(Acl)
    try:
        pos = external_positivity_check(Acl, beh.Bz, beh.Cz, positivity_horizon).to_dict()
    except UnstableClosedLoop as exc:
        pos = {"ok": False, "error": str(exc)}
    verdicts = {
        "stable": bool(rho < 1),
        "monotone": bool(mono),
        "first_violation": at,
        "nonnegative": bool(np.all(Y >= -vtol)),
        "min_output": float(Y.min()),
        "externally_positive": bool(pos["ok"]),
        "seed_window_nonnegative": bool(np.all(Y[: n + d] >= -vtol)),
    }
    meta = {
        "n": n, "m": m, "p": p, "d": d, "horizon": horizon, "x0": x0.tolist(), "y_ss": y_ss.tolist(),
        "tol": vtol, "monotone_from": start, "spectral_radius": rho, "positivity": pos,
        "lambdas": None if lambdas is None else list(np.ravel(lambdas)), **seed_meta,
    }
    return ClosedLoopRun(traj, np.asarray(u_seed, dtype=float), z_ss, u_ss, K, verdicts, meta)
