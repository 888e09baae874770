"""Rank, pseudo-inverse and kernel helpers sharing one tolerance policy.

Singular values below ``max(shape) * eps * sigma_max`` count as zero.
"""
import numpy as np

EPS = np.finfo(float).eps


def rank_tol(s, shape):
    if s.size == 0:
        return 0.0
    return max(shape) * EPS * s[0]


def matrix_rank(M):
    M = np.atleast_2d(np.asarray(M))
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > rank_tol(s, M.shape)))


def pinv(M):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    keep = s > rank_tol(s, M.shape)
    return (Vt[keep].T / s[keep]) @ U[:, keep].T


def null_space(M):
    """Orthonormal basis (as columns) of ker(M)."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    _, s, Vt = np.linalg.svd(M, full_matrices=True)
    rank = int(np.sum(s > rank_tol(s, M.shape)))
    return Vt[rank:].T.copy()


def orth(M):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    rank = int(np.sum(s > rank_tol(s, M.shape)))
    return U[:, :rank]


def as_matrix(a, rows=None, cols=None, name="matrix"):
    """Coerce to a float 2-D array; 1-D input becomes a column when that fits ``rows``."""
    from .errors import DimensionError

    M = np.asarray(a, dtype=float)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    elif M.ndim == 1:
        if rows is not None and rows == M.size and rows != 1:
            M = M.reshape(-1, 1)
        elif cols == 1 and rows is None:
            M = M.reshape(-1, 1)
        else:
            M = M.reshape(1, -1)
    if M.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {M.shape}")
    if rows is not None and M.shape[0] != rows:
        raise DimensionError(f"{name} must have {rows} rows, got {M.shape[0]}")
    if cols is not None and M.shape[1] != cols:
        raise DimensionError(f"{name} must have {cols} columns, got {M.shape[1]}")
    return M
