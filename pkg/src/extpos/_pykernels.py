"""Pure-Python reference kernels. Same signatures as the Cython module ``_ckernels``.

All arrays are C-contiguous float64. Time runs along axis 0.
"""
import numpy as np


def simulate(A, B, C, x0, U):
    """x(t+1) = A x(t) + B u(t), y(t) = C x(t) for t = 0..len(U)-1."""
    steps = U.shape[0]
    X = np.empty((steps, A.shape[0]))
    Y = np.empty((steps, C.shape[0]))
    x = x0.copy()
    for t in range(steps):
        X[t] = x
        Y[t] = C @ x
        x = A @ x + B @ U[t]
    return X, Y


def run_feedback(A, B, C, K, x0, seed_u, z_ss, u_ss, steps, n):
    """Seed window for t < n, then u(t) = K (z(t) - z_ss) + u_ss on the true plant."""
    nx, m = B.shape
    p = C.shape[0]
    X = np.empty((steps, nx))
    U = np.empty((steps, m))
    Y = np.empty((steps, p))
    z = np.empty(n * (m + p))
    x = x0.copy()
    for t in range(steps):
        X[t] = x
        Y[t] = C @ x
        if t < n:
            U[t] = seed_u[t]
        else:
            z[: n * m] = U[t - n : t].ravel()
            z[n * m :] = Y[t - n : t].ravel()
            U[t] = K @ (z - z_ss) + u_ss
        x = A @ x + B @ U[t]
    return X, U, Y


def markov(A, B, C, count):
    """Stack C A^k B for k = 0..count-1 into shape (count, p, m)."""
    out = np.empty((count, C.shape[0], B.shape[1]))
    V = B.copy()
    for k in range(count):
        out[k] = C @ V
        V = A @ V
    return out
