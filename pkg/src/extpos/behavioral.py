"""Input-output behavioral lift of an observable plant.

The behavioral state stacks the last n inputs and outputs, oldest first::

    z(t) = [u(t-n); ...; u(t-1); y(t-n); ...; y(t-1)]      (length r = n(m+p))

and evolves as z(t+1) = Az z(t) + Bz u(t) with y_z(t) = Cz z(t) = y(t-1). The only
non-trivial rows are the last p ones, y(t) = Au U(t-1) + Ay Y(t-1).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from ._linalg import as_matrix, matrix_rank, pinv
from .errors import DimensionError, NotObservable
from .lti import LtiSystem, simulate


@dataclass(frozen=True, eq=False)
class BehavioralSystem:
    Az: np.ndarray
    Bz: np.ndarray
    Cz: np.ndarray
    n: int
    m: int
    p: int

    @property
    def r(self) -> int:
        return self.n * (self.m + self.p)

    @property
    def Au(self) -> np.ndarray:
        return self.Az[-self.p :, : self.n * self.m]

    @property
    def Ay(self) -> np.ndarray:
        return self.Az[-self.p :, self.n * self.m :]

    def closed_loop(self, K) -> np.ndarray:
        return self.Az + self.Bz @ as_matrix(K, rows=self.m, cols=self.r, name="K")

    def to_dict(self) -> dict:
        return {
            "kind": "behavioral",
            "n": self.n, "m": self.m, "p": self.p,
            "A": self.Az.tolist(), "B": self.Bz.tolist(), "C": self.Cz.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BehavioralSystem":
        if data.get("kind") != "behavioral":
            raise DimensionError('expected "kind": "behavioral"')
        n, m, p = int(data["n"]), int(data["m"]), int(data["p"])
        Az = np.array(data["A"], dtype=float)
        return assemble(Az[-p:, : n * m], Az[-p:, n * m :], n, m, p)


def shift_structure(n: int, m: int, p: int):
    """The model-independent parts of the lift: (Az with zero last block row, Bz, Cz)."""
    r = n * (m + p)
    nm = n * m
    Az = np.zeros((r, r))
    Az[: nm - m, m:nm] = np.eye(nm - m)
    Az[nm : r - p, nm + p :] = np.eye(n * p - p)
    Bz = np.zeros((r, m))
    Bz[nm - m : nm] = np.eye(m)
    Cz = np.zeros((p, r))
    Cz[:, r - p :] = np.eye(p)
    return Az, Bz, Cz


def output_matrix(n: int, m: int, p: int) -> np.ndarray:
    return shift_structure(n, m, p)[2]


def assemble(Au, Ay, n: int, m: int, p: int) -> BehavioralSystem:
    Az, Bz, Cz = shift_structure(n, m, p)
    Az[-p:, : n * m] = Au
    Az[-p:, n * m :] = Ay
    for M in (Az, Bz, Cz):
        M.setflags(write=False)
    return BehavioralSystem(Az, Bz, Cz, n, m, p)


def lift(sys: LtiSystem) -> BehavioralSystem:
    """Lift an observable plant: Ay = C A^n O^+, Au = F2 - Ay F1."""
    n, m, p = sys.n, sys.m, sys.p
    O = sys.observability_matrix()
    rank = matrix_rank(O)
    if rank < n:
        raise NotObservable(f"observability matrix has rank {rank} < n = {n}; cannot lift")
    # F1: Y(t-1) = O x(t-n) + F1 U(t-1); strictly lower block Toeplitz in C A^k B
    F1 = np.zeros((n * p, n * m))
    for i in range(1, n):
        for j in range(i):
            F1[i * p : (i + 1) * p, j * m : (j + 1) * m] = sys.markov_parameter(i - j)
    F2 = np.hstack([sys.markov_parameter(n - j) for j in range(n)])
    CAn = sys.C @ np.linalg.matrix_power(sys.A, n)
    Ay = CAn @ pinv(O)
    Au = F2 - Ay @ F1
    return assemble(Au, Ay, n, m, p)


def pack_window(inputs, outputs) -> np.ndarray:
    """z from the n most recent inputs (n×m) and outputs (n×p), oldest first."""
    U = np.asarray(inputs, dtype=float)
    Y = np.asarray(outputs, dtype=float)
    U = U.reshape(len(U), -1) if U.ndim < 2 else U
    Y = Y.reshape(len(Y), -1) if Y.ndim < 2 else Y
    if U.shape[0] != Y.shape[0]:
        raise DimensionError(f"window lengths differ: {U.shape[0]} inputs vs {Y.shape[0]} outputs")
    return np.concatenate([U.ravel(), Y.ravel()])


def unpack_window(z, n: int, m: int, p: int):
    z = np.asarray(z, dtype=float).ravel()
    if z.size != n * (m + p):
        raise DimensionError(f"z must have {n * (m + p)} entries, got {z.size}")
    return z[: n * m].reshape(n, m), z[n * m :].reshape(n, p)


def lift_steady_state(u_ss, y_ss, n: int) -> np.ndarray:
    u_ss = np.atleast_1d(np.asarray(u_ss, dtype=float)).ravel()
    y_ss = np.atleast_1d(np.asarray(y_ss, dtype=float)).ravel()
    return np.concatenate([np.tile(u_ss, n), np.tile(y_ss, n)])


def equivalence_check(sys: LtiSystem, beh: BehavioralSystem, x0, inputs, horizon: int) -> float:
    """max over t in [n, horizon] of |y_sys(t) - y_beh(t)|_inf, z seeded from t = 0..n-1."""
    n = sys.n
    if beh.n != n or beh.m != sys.m or beh.p != sys.p:
        raise DimensionError("behavioral system does not match the plant dimensions")
    if horizon <= n:
        raise DimensionError(f"horizon must exceed n = {n}")
    U = np.asarray(inputs, dtype=float)
    U = U.reshape(-1, sys.m) if U.ndim == 1 else U
    if U.shape[0] < horizon + 1:
        raise DimensionError(f"need {horizon + 1} input samples, got {U.shape[0]}")
    U = U[: horizon + 1]
    traj = simulate(sys, x0, U)
    z_n = pack_window(U[:n], traj.outputs[:n])
    # iterate z(t+1) = Az z(t) + Bz u(t) for t = n..horizon; y(t) is Cz z(t+1)
    _, Yz = kernels.simulate(beh.Az, beh.Bz, beh.Cz, z_n, np.vstack([U[n:], np.zeros((1, sys.m))]))
    y_beh = Yz[1:]
    return float(np.max(np.abs(traj.outputs[n:] - y_beh)))


def evaluate_controller(K, inputs, outputs, z_ss, u_ss) -> np.ndarray:
    """u(t) = K (z(t) - z_ss) + u_ss using the last n samples of the given history."""
    K = np.atleast_2d(np.asarray(K, dtype=float))
    z_ss = np.asarray(z_ss, dtype=float).ravel()
    u_ss = np.atleast_1d(np.asarray(u_ss, dtype=float)).ravel()
    m = K.shape[0]
    U = np.asarray(inputs, dtype=float).reshape(-1, m)
    Y = np.asarray(outputs, dtype=float)
    Y = Y.reshape(len(Y), -1) if Y.ndim < 2 else Y
    p = Y.shape[1]
    n = z_ss.size // (m + p)
    if len(U) < n or len(Y) < n:
        raise DimensionError(f"controller needs the last {n} inputs and outputs")
    z = pack_window(U[len(U) - n :], Y[len(Y) - n :])
    return K @ (z - z_ss) + u_ss
