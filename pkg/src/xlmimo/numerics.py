"""Dense complex linear-algebra kernels shared by the estimators.

Matrices are plain ``numpy`` arrays. ``vec`` stacks columns (Fortran order),
so ``vec(A @ X @ B) == kron(B.T, A) @ vec(X)``.
"""

import numpy as np
from scipy import linalg

from .errors import DimensionMismatch, NotPositiveDefinite, RankDeficient

_JITTER = 1e-12


def vec(X):
    """Column-stacking vectorization."""
    return np.asarray(X).reshape(-1, order="F")


def invec(x, rows, cols):
    """Inverse of :func:`vec`."""
    return np.asarray(x).reshape((rows, cols), order="F")


def cholesky_lower(K):
    """Lower Cholesky factor ``L`` with ``L @ L^H == K``.

    A diagonal jitter of 1e-12 (relative to the mean diagonal) is tried once
    when the first factorization fails.

    Raises
    ------
    NotPositiveDefinite
        If ``K`` is not Hermitian or a pivot is not positive.
    """
    K = np.atleast_2d(np.asarray(K, dtype=complex))
    if K.shape[0] != K.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got {K.shape}")
    scale = np.linalg.norm(K)
    if np.linalg.norm(K - K.conj().T) > 1e-10 * max(scale, np.finfo(float).tiny):
        raise NotPositiveDefinite("matrix is not Hermitian")
    try:
        return np.linalg.cholesky(K)
    except np.linalg.LinAlgError:
        pass
    bump = _JITTER * max(np.mean(np.abs(np.diag(K))), 1.0)
    try:
        return np.linalg.cholesky(K + bump * np.eye(K.shape[0]))
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("non-positive pivot in Cholesky factorization") from exc


def solve_lower(L, B):
    """Solve ``L X = B`` for lower-triangular ``L``."""
    return linalg.solve_triangular(L, B, lower=True, check_finite=False)


def least_squares(A, b):
    """Minimum-residual solution of ``A x = b`` for a full-column-rank ``A``.

    ``b`` may be a vector or a matrix of right-hand sides.

    Raises
    ------
    RankDeficient
        If the numerical rank of ``A`` is below its column count.
    """
    A = np.asarray(A)
    b = np.asarray(b)
    if A.ndim != 2:
        raise DimensionMismatch("A must be two-dimensional")
    m, n = A.shape
    if b.shape[0] != m:
        raise DimensionMismatch(f"A has {m} rows but b has {b.shape[0]}")
    if n > m:
        raise RankDeficient(f"{n} columns cannot be independent in {m} rows")
    Q, R = np.linalg.qr(A, mode="reduced")
    diag = np.abs(np.diag(R))
    tol = max(m, n) * np.finfo(float).eps * (diag.max() if n else 0.0)
    if n and (diag.min() <= tol or not np.all(np.isfinite(diag))):
        raise RankDeficient("columns are numerically dependent")
    return linalg.solve_triangular(R, Q.conj().T @ b, lower=False, check_finite=False)


def sandwich_apply(Wbar, X, F):
    """``vec(Wbar @ X @ F)``, i.e. ``kron(F.T, Wbar) @ vec(X)`` without the Kronecker product."""
    Wbar, X, F = np.asarray(Wbar), np.asarray(X), np.asarray(F)
    if Wbar.shape[1] != X.shape[0] or X.shape[1] != F.shape[0]:
        raise DimensionMismatch(
            f"cannot form {Wbar.shape} @ {X.shape} @ {F.shape}"
        )
    return vec(Wbar @ X @ F)
