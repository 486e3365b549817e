"""Dense linear-algebra helpers used by every solver.

One rank convention is used throughout: a singular value counts as
nonzero when it exceeds ``rank_tol * sigma_max``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

DEFAULT_RANK_TOL = 1e-10


@dataclass(frozen=True)
class LeastSquaresResult:
    solution: np.ndarray
    residual_norm: float
    rank: int


def numerical_rank(A, rank_tol: float = DEFAULT_RANK_TOL) -> int:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        return 0
    sv = linalg.svd(A, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.count_nonzero(sv > rank_tol * sv[0]))


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each row so its first non-negligible entry is positive."""
    out = vectors.copy()
    for row in out:
        nz = np.flatnonzero(np.abs(row) > 1e-12)
        if nz.size and row[nz[0]] < 0:
            row *= -1.0
    return out


def row_space_split(A, rank_tol: float = DEFAULT_RANK_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal bases of the row space of ``A`` and of its kernel.

    Returns:
        ``(row_basis, null_basis)``, both with one basis vector per row,
        sign-normalized so that output is deterministic.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    cols = A.shape[1]
    if A.shape[0] == 0 or not np.any(A):
        return np.zeros((0, cols)), np.eye(cols)
    _, sv, vt = linalg.svd(A, full_matrices=True)
    r = int(np.count_nonzero(sv > rank_tol * sv[0]))
    return _fix_signs(vt[:r]), _fix_signs(vt[r:])


def orthonormal_nullspace(A, rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Orthonormal basis of ker(A), one vector per row (possibly zero rows)."""
    return row_space_split(A, rank_tol)[1]


def least_squares(A, b) -> LeastSquaresResult:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    x, _, rank, _ = linalg.lstsq(A, b, lapack_driver="gelsd")
    resid = float(np.linalg.norm(A @ x - b))
    return LeastSquaresResult(solution=x, residual_norm=resid, rank=int(rank))


def principal_minor(A, i: int) -> float:
    """Determinant of ``A`` with row ``i`` and column ``i`` removed (0-based).

    The empty determinant of a 1x1 input is 1.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("principal_minor needs a square matrix")
    n = A.shape[0]
    if not 0 <= i < n:
        raise IndexError(f"index {i} out of range for {n}x{n} matrix")
    if n == 1:
        return 1.0
    keep = [j for j in range(n) if j != i]
    return float(linalg.det(A[np.ix_(keep, keep)]))


def independent_rows(A, rank: int) -> list[int]:
    """Indices of ``rank`` linearly independent rows, chosen by pivoted QR."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if rank == 0:
        return []
    _, _, piv = linalg.qr(A.T, mode="economic", pivoting=True)
    return sorted(int(p) for p in piv[:rank])
