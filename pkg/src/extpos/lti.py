"""Discrete-time LTI plants: representation, simulation and the standing assumptions.

The plant is

    x(t+1) = A x(t) + B u(t),    y(t) = C x(t),

with no feedthrough, so ``y(t)`` depends on ``x(t)`` only.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from . import kernels
from ._linalg import as_matrix, matrix_rank, rank_tol
from .errors import AssumptionViolation, DimensionError, NoRelativeDegree

#: Absolute threshold on the largest entry of a Markov parameter C A^k B.
MARKOV_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class LtiSystem:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    markov_tol: float = MARKOV_TOL

    def __post_init__(self):
        A = as_matrix(self.A, name="A")
        n = A.shape[0]
        if A.shape != (n, n) or n < 1:
            raise DimensionError(f"A must be square and non-empty, got {A.shape}")
        B = as_matrix(self.B, rows=n, name="B")
        C = as_matrix(self.C, cols=n, name="C")
        for name, M in (("A", A), ("B", B), ("C", C)):
            M.setflags(write=False)
            object.__setattr__(self, name, M)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @cached_property
    def d(self) -> int:
        return relative_degree(self)

    def markov_parameter(self, k: int) -> np.ndarray:
        """C A^(k-1) B for k >= 1."""
        return self.C @ np.linalg.matrix_power(self.A, k - 1) @ self.B

    def observability_matrix(self, start: int = 0, blocks: int | None = None) -> np.ndarray:
        """Stack C A^start, ..., C A^(start+blocks-1)."""
        blocks = self.n if blocks is None else blocks
        rows = []
        Ak = np.linalg.matrix_power(self.A, start)
        for _ in range(blocks):
            rows.append(self.C @ Ak)
            Ak = Ak @ self.A
        return np.vstack(rows)

    def toeplitz(self, first: int, blocks: int | None = None) -> np.ndarray:
        """Block lower-triangular Toeplitz matrix with diagonal block C A^(first-1) B.

        Block (i, j) is C A^(first-1+i-j) B for i >= j, zero above the diagonal.
        ``first = 1`` with a shifted row gives the strictly lower matrix of the lifting.
        """
        blocks = self.n if blocks is None else blocks
        p, m = self.p, self.m
        T = np.zeros((blocks * p, blocks * m))
        for i in range(blocks):
            for j in range(i + 1):
                k = first + i - j
                if k >= 1:
                    T[i * p : (i + 1) * p, j * m : (j + 1) * m] = self.markov_parameter(k)
        return T

    def to_dict(self) -> dict:
        return {"A": self.A.tolist(), "B": self.B.tolist(), "C": self.C.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "LtiSystem":
        try:
            return cls(np.array(data["A"], dtype=float), np.array(data["B"], dtype=float),
                       np.array(data["C"], dtype=float))
        except KeyError as exc:
            raise DimensionError(f"system file lacks field {exc}") from None


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Samples t = 0..T. ``inputs`` is (T+1)×m, ``outputs`` (T+1)×p, ``states`` (T+1)×n or None."""

    inputs: np.ndarray
    outputs: np.ndarray
    states: np.ndarray | None = None
    ts: float | None = None

    def __post_init__(self):
        u = np.asarray(self.inputs, dtype=float)
        y = np.asarray(self.outputs, dtype=float)
        u = u.reshape(-1, 1) if u.ndim == 1 else u
        y = y.reshape(-1, 1) if y.ndim == 1 else y
        if u.shape[0] != y.shape[0]:
            raise DimensionError(f"inputs ({u.shape[0]}) and outputs ({y.shape[0]}) differ in length")
        object.__setattr__(self, "inputs", u)
        object.__setattr__(self, "outputs", y)
        if self.states is not None:
            x = np.asarray(self.states, dtype=float)
            if x.shape[0] != u.shape[0]:
                raise DimensionError("states length differs from inputs length")
            object.__setattr__(self, "states", x)

    @property
    def T(self) -> int:
        return self.inputs.shape[0] - 1

    @property
    def m(self) -> int:
        return self.inputs.shape[1]

    @property
    def p(self) -> int:
        return self.outputs.shape[1]

    def to_csv(self, path) -> None:
        write_trajectory_csv(path, self)


@dataclass
class AssumptionReport:
    observable: bool
    stabilizable: bool
    right_invertible: bool
    no_invariant_zero_at_one: bool
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.observable and self.stabilizable and self.right_invertible and self.no_invariant_zero_at_one

    def failed(self) -> list[str]:
        names = ("observable", "stabilizable", "right_invertible", "no_invariant_zero_at_one")
        return [k for k in names if not getattr(self, k)]

    def to_dict(self) -> dict:
        return {
            "observable": self.observable,
            "stabilizable": self.stabilizable,
            "right_invertible": self.right_invertible,
            "no_invariant_zero_at_one": self.no_invariant_zero_at_one,
            "ok": self.ok,
            "details": self.details,
        }


def simulate(sys: LtiSystem, x0, inputs) -> Trajectory:
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.size != sys.n:
        raise DimensionError(f"x0 has {x0.size} entries, system has n={sys.n}")
    U = np.asarray(inputs, dtype=float)
    if U.ndim == 1:
        U = U.reshape(-1, 1) if sys.m == 1 else U.reshape(1, -1)
    if U.ndim != 2 or U.shape[1] != sys.m:
        raise DimensionError(f"inputs must be (T+1)x{sys.m}, got {U.shape}")
    if U.shape[0] < 1:
        raise DimensionError("need at least one input sample")
    X, Y = kernels.simulate(sys.A, sys.B, sys.C, x0, U)
    return Trajectory(U, Y, X)


def relative_degree(sys: LtiSystem, tol: float | None = None) -> int:
    tol = sys.markov_tol if tol is None else tol
    V = sys.B.copy()
    for k in range(1, 2 * sys.n + 1):
        if np.max(np.abs(sys.C @ V)) > tol:
            return k
        V = sys.A @ V
    raise NoRelativeDegree(f"all Markov parameters C A^(k-1) B, k = 1..{2 * sys.n}, are below {tol:g}")


def check_assumptions(sys: LtiSystem) -> AssumptionReport:
    n, m, p = sys.n, sys.m, sys.p
    details: dict = {}

    obs_rank = matrix_rank(sys.observability_matrix())
    details["observability_rank"] = obs_rank

    eigs = np.linalg.eigvals(sys.A)
    bad = []
    for lam in eigs:
        if abs(lam) >= 1 - 1e-12:
            pencil = np.hstack([sys.A - lam * np.eye(n), sys.B])
            if matrix_rank(pencil) < n:
                bad.append(complex(lam))
    details["uncontrollable_unstable_eigenvalues"] = [[z.real, z.imag] for z in bad]

    try:
        d = relative_degree(sys)
    except NoRelativeDegree:
        d = None
    details["relative_degree"] = d
    if d is None:
        toeplitz_rank = 0
    else:
        toeplitz_rank = matrix_rank(sys.toeplitz(d))
    details["markov_toeplitz_rank"] = toeplitz_rank
    details["markov_toeplitz_required"] = p * n

    rosenbrock = np.block([[sys.A - np.eye(n), sys.B], [sys.C, np.zeros((p, m))]])
    ros_rank = matrix_rank(rosenbrock)
    details["rosenbrock_rank_at_1"] = ros_rank
    details["rosenbrock_required"] = n + p

    return AssumptionReport(
        observable=obs_rank == n,
        stabilizable=not bad,
        right_invertible=toeplitz_rank == p * n,
        no_invariant_zero_at_one=ros_rank == n + p,
        details=details,
    )


def steady_state(sys: LtiSystem, y_ss, tol: float = 1e-9):
    """Minimum-norm (x_ss, u_ss) with x_ss = A x_ss + B u_ss and C x_ss = y_ss."""
    n, m, p = sys.n, sys.m, sys.p
    y_ss = np.asarray(y_ss, dtype=float).ravel()
    if y_ss.size != p:
        raise DimensionError(f"y_ss must have {p} entries")
    M = np.block([[sys.A - np.eye(n), sys.B], [sys.C, np.zeros((p, m))]])
    rhs = np.concatenate([np.zeros(n), y_ss])
    sol, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    scale = max(1.0, np.max(np.abs(y_ss)))
    if np.max(np.abs(M @ sol - rhs)) > tol * scale:
        raise AssumptionViolation(
            "steady-state equations have no solution for this y_ss "
            "(invariant zero at 1 or not right-invertible)"
        )
    return sol[:n], sol[n:]


def check_assumption1(outputs, d: int, tol: float = 1e-9) -> bool:
    """True iff y(0), ..., y(d-1) are all >= -tol."""
    Y = np.asarray(outputs, dtype=float)
    Y = Y.reshape(-1, 1) if Y.ndim == 1 else Y
    if Y.shape[0] < d:
        raise DimensionError(f"need at least d={d} output samples, got {Y.shape[0]}")
    return bool(np.all(Y[:d] >= -tol))


# -- file formats -------------------------------------------------------------

def load_system(path) -> LtiSystem:
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise DimensionError("system file must hold a JSON object")
    return LtiSystem.from_dict(data)


def save_system(path, sys: LtiSystem) -> None:
    Path(path).write_text(json.dumps(sys.to_dict(), indent=2) + "\n")


def _fmt(v: float) -> str:
    return repr(float(v))


def write_trajectory_csv(path, traj: Trajectory, extra: dict | None = None) -> None:
    """Header ``t,u_0..u_{m-1},y_0..y_{p-1}``; full double precision via repr."""
    m, p = traj.m, traj.p
    header = ["t"] + [f"u_{i}" for i in range(m)] + [f"y_{i}" for i in range(p)]
    cols = []
    if extra:
        header += list(extra)
        cols = [np.asarray(v, dtype=float).ravel() for v in extra.values()]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for t in range(traj.T + 1):
            row = [str(t)] + [_fmt(v) for v in traj.inputs[t]] + [_fmt(v) for v in traj.outputs[t]]
            row += [_fmt(c[t]) for c in cols]
            w.writerow(row)


def read_trajectory_csv(path) -> Trajectory:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DimensionError(f"{path}: empty trajectory file")
    header = rows[0]
    ucols = [i for i, h in enumerate(header) if h.startswith("u_")]
    ycols = [i for i, h in enumerate(header) if h.startswith("y_")]
    if not header or header[0] != "t" or not ucols or not ycols:
        raise DimensionError(f"{path}: header must be t,u_0..,y_0..")
    try:
        data = np.array([[float(r[i]) for i in ucols + ycols] for r in rows[1:]])
    except (ValueError, IndexError) as exc:
        raise DimensionError(f"{path}: malformed row ({exc})") from None
    m = len(ucols)
    return Trajectory(data[:, :m], data[:, m:])


__all__ = [
    "LtiSystem", "Trajectory", "AssumptionReport", "simulate", "relative_degree",
    "check_assumptions", "steady_state", "check_assumption1", "load_system", "save_system",
    "write_trajectory_csv", "read_trajectory_csv",
]
