"""Dense least-squares and projection kernels.

Everything here goes through a thin SVD so that the rank decision is made in
one place: a singular value counts iff ``s > max(m, k) * s_max * eps``.
That is the same convention as ``numpy.linalg.matrix_rank`` and
``lstsq(rcond=None)``. A matrix with zero columns is a valid input and
stands for the empty active set.

Incremental QR updating is possible in principle (the active set grows by one
column per iteration) but is not implemented; every call factors from scratch.
"""

from __future__ import annotations

import numpy as np

_EPS = np.finfo(float).eps


class InvalidInputError(ValueError):
    """Raised for non-finite data or inconsistent dimensions."""


def _as_matrix(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A.reshape(-1, 1) if A.size else A.reshape(0, 0)
    if A.ndim != 2:
        raise InvalidInputError(f"expected a 2-D matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError("matrix has non-finite entries")
    return A


def _as_vector(v, length: int | None = None) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(-1)
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("vector has non-finite entries")
    if length is not None and v.size != length:
        raise InvalidInputError(f"expected length {length}, got {v.size}")
    return v


def rank_tolerance(A: np.ndarray, s_max: float) -> float:
    """Absolute cut-off below which a singular value of ``A`` is treated as zero."""
    return max(A.shape) * s_max * _EPS


def _range_basis(A: np.ndarray) -> np.ndarray:
    """Orthonormal basis of range(A), shape (m, rank)."""
    m, k = A.shape
    if k == 0:
        return np.zeros((m, 0))
    U, s, _ = np.linalg.svd(A, full_matrices=False)
    r = int(np.sum(s > rank_tolerance(A, s[0]))) if s.size else 0
    return U[:, :r]


def numerical_rank(A) -> int:
    A = _as_matrix(A)
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    return int(np.sum(s > rank_tolerance(A, s[0])))


def pinv(A) -> np.ndarray:
    """Moore-Penrose pseudoinverse with the module's rank threshold."""
    A = _as_matrix(A)
    m, k = A.shape
    if k == 0 or m == 0:
        return np.zeros((k, m))
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    keep = s > rank_tolerance(A, s[0])
    return (Vt[keep].T / s[keep]) @ U[:, keep].T


def min_norm_lstsq(A, b) -> np.ndarray:
    """Return ``A^+ b``, the minimum 2-norm minimiser of ``||A x - b||``.

    ``A`` may have zero columns, in which case an empty vector is returned.
    """
    A = _as_matrix(A)
    b = _as_vector(b, A.shape[0])
    m, k = A.shape
    if k == 0:
        return np.zeros(0)
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    keep = s > rank_tolerance(A, s[0])
    coef = (U[:, keep].T @ b) / s[keep]
    return Vt[keep].T @ coef


def residual_projection(L, v) -> np.ndarray:
    """Component of ``v`` orthogonal to range(L), i.e. ``(I - L L^+) v``."""
    L = _as_matrix(L) if np.size(L) else np.zeros((np.size(v), 0))
    v = _as_vector(v)
    if L.shape[0] != v.size:
        raise InvalidInputError(
            f"L has {L.shape[0]} rows but v has length {v.size}"
        )
    Q = _range_basis(L)
    return v - Q @ (Q.T @ v)


def project_columns(L: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Apply ``I - L L^+`` to every column of ``M`` at once."""
    Q = _range_basis(L)
    if Q.shape[1] == 0:
        return M.copy()
    return M - Q @ (Q.T @ M)
