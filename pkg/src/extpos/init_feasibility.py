"""Inputs for the first n steps that place the window outputs y(d..n+d-1) at a target.

Two routes reach the same answer. The model route inverts the block-Toeplitz
Markov map F_d. The data route works from an ensemble of short recorded
experiments with known initial states, and never touches (A, B, C).

Note that the data route needs *state* data X_0 for every experiment, which an
output-feedback setting would not normally have.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._linalg import matrix_rank, null_space, pinv
from .errors import AssumptionViolation, DimensionError
from .lti import LtiSystem, check_assumption1, read_trajectory_csv, simulate, write_trajectory_csv


def window_maps(sys: LtiSystem):
    """(O_d, F_d) with [y(d); ...; y(n+d-1)] = O_d x0 + F_d [u(0); ...; u(n-1)]."""
    d = sys.d
    return sys.observability_matrix(start=d), sys.toeplitz(d)


def default_target(y0, n: int) -> np.ndarray:
    """Hold the initial output over the window."""
    return np.tile(np.atleast_1d(np.asarray(y0, dtype=float)).ravel(), n)


def _check_target(v, size, tol=0.0):
    v = np.asarray(v, dtype=float).ravel()
    if v.size != size:
        raise DimensionError(f"target v must have n*p = {size} entries, got {v.size}")
    if np.any(v < -tol):
        raise AssumptionViolation(f"target v must be nonnegative, min entry {v.min():g}")
    return v


def feasible_input_model(sys: LtiSystem, x0, v=None) -> np.ndarray:
    """u(0..n-1) (as an n×m array) with y(d..n+d-1) = v; minimum-norm solution."""
    n, m, p = sys.n, sys.m, sys.p
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.size != n:
        raise DimensionError(f"x0 must have {n} entries")
    if v is None:
        v = default_target(sys.C @ x0, n)
    v = _check_target(v, n * p)
    O_d, F_d = window_maps(sys)
    rank = matrix_rank(F_d)
    if rank < n * p:
        raise AssumptionViolation(f"F_d has rank {rank} < n*p = {n * p}: not right-invertible on the window")
    return (pinv(F_d) @ (v - O_d @ x0)).reshape(n, m)


@dataclass(frozen=True, eq=False)
class EnsembleData:
    """Columns are experiments. ``Y_pre`` (d·p × N) holds y(0..d-1) when available."""

    U_N: np.ndarray
    X_0: np.ndarray
    Y_N: np.ndarray
    n: int
    m: int
    p: int
    d: int
    Y_pre: np.ndarray | None = None

    def __post_init__(self):
        N = self.U_N.shape[1]
        if self.U_N.shape[0] != self.n * self.m or self.X_0.shape != (self.n, N) or self.Y_N.shape != (self.n * self.p, N):
            raise DimensionError("ensemble blocks have inconsistent shapes")
        if self.Y_pre is not None and self.Y_pre.shape != (self.d * self.p, N):
            raise DimensionError("Y_pre must be (d*p)×N")

    @property
    def N(self) -> int:
        return self.U_N.shape[1]

    def stacked_rank(self) -> int:
        return matrix_rank(np.vstack([self.U_N, self.X_0]))


def ensemble_from_trajectories(trajs, x0s, n: int, d: int) -> EnsembleData:
    """Each trajectory must cover t = 0..n+d-1."""
    if not trajs:
        raise DimensionError("empty ensemble")
    m, p = trajs[0].m, trajs[0].p
    cols_u, cols_y, cols_pre = [], [], []
    for tr in trajs:
        if tr.T + 1 < n + d:
            raise DimensionError(f"ensemble trajectories need {n + d} samples, got {tr.T + 1}")
        cols_u.append(tr.inputs[:n].ravel())
        cols_y.append(tr.outputs[d : n + d].ravel())
        cols_pre.append(tr.outputs[:d].ravel())
    X0 = np.array([np.asarray(x, dtype=float).ravel() for x in x0s]).T
    return EnsembleData(np.array(cols_u).T, X0, np.array(cols_y).T, n, m, p, d, np.array(cols_pre).T)


def generate_ensemble(sys: LtiSystem, N: int | None = None, seed: int = 0):
    """N (default 2n+2) experiments with i.i.d. uniform [-1, 1] inputs and initial states.

    Returns ``(EnsembleData, trajectories, initial_states)``.
    """
    n, m, d = sys.n, sys.m, sys.d
    N = 2 * n + 2 if N is None else int(N)
    if N < 2 * n:
        raise DimensionError(f"need at least 2n = {2 * n} experiments")
    rng = np.random.default_rng(seed)
    trajs, x0s = [], []
    for _ in range(N):
        x0 = rng.uniform(-1, 1, n)
        u = np.zeros((n + d, m))
        u[:n] = rng.uniform(-1, 1, (n, m))
        trajs.append(simulate(sys, x0, u))
        x0s.append(x0)
    return ensemble_from_trajectories(trajs, x0s, n, d), trajs, x0s


def null_projection_rank(ens: EnsembleData) -> int:
    """rank(Y_N X_null), which equals n*p when the ensemble is informative."""
    return matrix_rank(ens.Y_N @ null_space(ens.X_0))


def feasible_input_data(ens: EnsembleData, x0, v=None) -> np.ndarray:
    """u(0..n-1) from data: alpha = X0^+ x0 + X_null (Y_N X_null)^+ (v - Y_N X0^+ x0), u = U_N alpha."""
    n, m, p = ens.n, ens.m, ens.p
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.size != n:
        raise DimensionError(f"x0 must have {n} entries")
    if matrix_rank(ens.X_0) < n:
        raise AssumptionViolation("initial-state data X_0 is row-rank deficient")
    X0p = pinv(ens.X_0)
    a0 = X0p @ x0
    if v is None:
        if ens.Y_pre is None:
            raise DimensionError("no target given and ensemble lacks y(0) data for the default")
        v = default_target((ens.Y_pre @ a0)[:p], n)
    v = _check_target(v, n * p)
    Xn = null_space(ens.X_0)
    W = ens.Y_N @ Xn
    rank = matrix_rank(W)
    if rank < n * p:
        raise AssumptionViolation(f"Y_N X_null has rank {rank} < {n * p}")
    alpha = a0 + Xn @ (pinv(W) @ (v - ens.Y_N @ a0))
    return (ens.U_N @ alpha).reshape(n, m)


@dataclass
class WindowReport:
    ok: bool
    witness: np.ndarray | None
    window_outputs: np.ndarray | None
    assumption1: bool | None
    target: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        arr = lambda a: None if a is None else np.asarray(a).tolist()  # noqa: E731
        return {
            "ok": self.ok,
            "assumption1": self.assumption1,
            "witness": arr(self.witness),
            "window_outputs": arr(self.window_outputs),
            "target": arr(self.target),
            "diagnostics": self.diagnostics,
        }


def verify_theorem1(source, x0, v=None, tol: float = 1e-9) -> WindowReport:
    """Check that some u(0..n-1) makes the window nonnegative; never raises on domain failure.

    ``source`` is an LtiSystem (outputs checked by forward simulation) or an
    EnsembleData (outputs implied by the data). The pre-window sign check on y(0..d-1) is
    reported separately in ``assumption1``.
    """
    x0 = np.asarray(x0, dtype=float).ravel()
    diag: dict = {}
    try:
        if isinstance(source, LtiSystem):
            n, d = source.n, source.d
            pre = np.array([source.C @ np.linalg.matrix_power(source.A, k) @ x0 for k in range(d)])
            if v is None:
                v = default_target(pre[0], n)
            u = feasible_input_model(source, x0, v)
            U = np.vstack([u, np.zeros((d, source.m))])
            y = simulate(source, x0, U).outputs[d : n + d]
        elif isinstance(source, EnsembleData):
            n, d = source.n, source.d
            a0 = pinv(source.X_0) @ x0
            pre = None if source.Y_pre is None else (source.Y_pre @ a0).reshape(d, source.p)
            u = feasible_input_data(source, x0, v)
            if v is None:
                v = default_target(pre[0], n)
            alpha = pinv(np.vstack([source.U_N, source.X_0])) @ np.concatenate([u.ravel(), x0])
            y = (source.Y_N @ alpha).reshape(n, source.p)
        else:
            raise DimensionError("source must be an LtiSystem or EnsembleData")
    except (AssumptionViolation, DimensionError) as exc:
        diag["error"] = str(exc)
        return WindowReport(False, None, None, None, None if v is None else np.ravel(v), diag)
    a1 = None if pre is None else check_assumption1(pre, d, tol)
    v = np.ravel(v)
    diag["target_error"] = float(np.max(np.abs(y.ravel() - v)))
    ok = bool(np.all(y >= -tol))
    return WindowReport(ok, u, y, a1, v, diag)


# -- ensemble directory format -------------------------------------------------

MANIFEST = "manifest.json"


def save_ensemble(directory, trajs, x0s, n: int, d: int) -> None:
    """Write ``traj_XXX.csv`` files plus a manifest with n, d and the initial states."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = []
    for k, tr in enumerate(trajs):
        name = f"traj_{k:03d}.csv"
        write_trajectory_csv(directory / name, tr)
        files.append(name)
    manifest = {"n": n, "d": d, "files": files, "x0": [np.asarray(x).tolist() for x in x0s]}
    (directory / MANIFEST).write_text(json.dumps(manifest, indent=2) + "\n")


def load_ensemble(directory) -> EnsembleData:
    directory = Path(directory)
    try:
        manifest = json.loads((directory / MANIFEST).read_text())
        files, x0s = manifest["files"], manifest["x0"]
        n, d = int(manifest["n"]), int(manifest["d"])
    except (OSError, ValueError, KeyError) as exc:
        raise DimensionError(f"bad ensemble manifest in {directory}: {exc}") from None
    if len(files) != len(x0s):
        raise DimensionError("manifest lists different numbers of files and initial states")
    trajs = [read_trajectory_csv(directory / f) for f in files]
    return ensemble_from_trajectories(trajs, x0s, n, d)


__all__ = [
    "window_maps", "default_target", "feasible_input_model", "EnsembleData", "ensemble_from_trajectories",
    "generate_ensemble", "null_projection_rank", "feasible_input_data", "WindowReport",
    "verify_theorem1", "save_ensemble", "load_ensemble",
]
