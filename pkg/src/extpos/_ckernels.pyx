# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels mirroring ``_pykernels``: plain loops over typed memoryviews."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline void _matvec(const double[:, ::1] M, const double[::1] v, double[::1] out) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(M.shape[0]):
        acc = 0.0
        for j in range(M.shape[1]):
            acc = acc + M[i, j] * v[j]
        out[i] = acc


def simulate(const double[:, ::1] A, const double[:, ::1] B, const double[:, ::1] C,
             const double[::1] x0, const double[:, ::1] U):
    cdef Py_ssize_t steps = U.shape[0], nx = A.shape[0], m = B.shape[1], p = C.shape[0]
    cdef Py_ssize_t t, i, j
    cdef double acc
    X_arr = np.empty((steps, nx))
    Y_arr = np.empty((steps, p))
    cdef double[:, ::1] X = X_arr
    cdef double[:, ::1] Y = Y_arr
    cdef double[::1] x = np.array(x0, dtype=np.float64)
    cdef double[::1] xn = np.empty(nx)
    with nogil:
        for t in range(steps):
            for i in range(nx):
                X[t, i] = x[i]
            for i in range(p):
                acc = 0.0
                for j in range(nx):
                    acc = acc + C[i, j] * x[j]
                Y[t, i] = acc
            for i in range(nx):
                acc = 0.0
                for j in range(nx):
                    acc = acc + A[i, j] * x[j]
                for j in range(m):
                    acc = acc + B[i, j] * U[t, j]
                xn[i] = acc
            for i in range(nx):
                x[i] = xn[i]
    return X_arr, Y_arr


def run_feedback(const double[:, ::1] A, const double[:, ::1] B, const double[:, ::1] C,
                 const double[:, ::1] K, const double[::1] x0, const double[:, ::1] seed_u,
                 const double[::1] z_ss, const double[::1] u_ss, Py_ssize_t steps, Py_ssize_t n):
    cdef Py_ssize_t nx = A.shape[0], m = B.shape[1], p = C.shape[0]
    cdef Py_ssize_t r = n * (m + p)
    cdef Py_ssize_t t, i, j, k
    cdef double acc
    X_arr = np.empty((steps, nx))
    U_arr = np.empty((steps, m))
    Y_arr = np.empty((steps, p))
    cdef double[:, ::1] X = X_arr
    cdef double[:, ::1] U = U_arr
    cdef double[:, ::1] Y = Y_arr
    cdef double[::1] x = np.array(x0, dtype=np.float64)
    cdef double[::1] xn = np.empty(nx)
    cdef double[::1] zeta = np.empty(r)
    with nogil:
        for t in range(steps):
            for i in range(nx):
                X[t, i] = x[i]
            for i in range(p):
                acc = 0.0
                for j in range(nx):
                    acc = acc + C[i, j] * x[j]
                Y[t, i] = acc
            if t < n:
                for i in range(m):
                    U[t, i] = seed_u[t, i]
            else:
                for k in range(n):
                    for i in range(m):
                        zeta[k * m + i] = U[t - n + k, i] - z_ss[k * m + i]
                    for i in range(p):
                        zeta[n * m + k * p + i] = Y[t - n + k, i] - z_ss[n * m + k * p + i]
                for i in range(m):
                    acc = u_ss[i]
                    for j in range(r):
                        acc = acc + K[i, j] * zeta[j]
                    U[t, i] = acc
            for i in range(nx):
                acc = 0.0
                for j in range(nx):
                    acc = acc + A[i, j] * x[j]
                for j in range(m):
                    acc = acc + B[i, j] * U[t, j]
                xn[i] = acc
            for i in range(nx):
                x[i] = xn[i]
    return X_arr, U_arr, Y_arr


def markov(const double[:, ::1] A, const double[:, ::1] B, const double[:, ::1] C, Py_ssize_t count):
    cdef Py_ssize_t nx = A.shape[0], m = B.shape[1], p = C.shape[0]
    cdef Py_ssize_t k, i, j, l
    cdef double acc
    out_arr = np.empty((count, p, m))
    cdef double[:, :, ::1] out = out_arr
    cdef double[:, ::1] V = np.array(B, dtype=np.float64)
    cdef double[:, ::1] W = np.empty((nx, m))
    with nogil:
        for k in range(count):
            for i in range(p):
                for l in range(m):
                    acc = 0.0
                    for j in range(nx):
                        acc = acc + C[i, j] * V[j, l]
                    out[k, i, l] = acc
            for i in range(nx):
                for l in range(m):
                    acc = 0.0
                    for j in range(nx):
                        acc = acc + A[i, j] * V[j, l]
                    W[i, l] = acc
            for i in range(nx):
                for l in range(m):
                    V[i, l] = W[i, l]
    return out_arr
