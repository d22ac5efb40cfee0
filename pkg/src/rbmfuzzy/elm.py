"""Minimum-norm least squares for the consequent weights."""

import numpy as np

from .errors import DataError

RCOND = 1e-12


def pinv(A, rcond: float = RCOND) -> np.ndarray:
    """Moore-Penrose inverse via SVD; singular values below ``rcond * s_max``
    are treated as zero."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise DataError("pinv expects a 2-D matrix")
    if not np.all(np.isfinite(A)):
        raise DataError("pinv input has non-finite entries")
    if A.size == 0:
        return np.zeros(A.T.shape)
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    cutoff = rcond * (s[0] if s.size else 0.0)
    inv = np.zeros_like(s)
    keep = s > cutoff
    inv[keep] = 1.0 / s[keep]
    return (Vt.T * inv) @ U.T


def solve_consequents(Psi, Y) -> np.ndarray:
    """``W* = Y Psi^+`` for ``Psi`` of shape (K, N) and targets ``Y`` (N,).

    Returns the minimum-norm minimizer of ``sum_k (y(k) - W Psi[:, k])^2``.
    """
    Psi = np.atleast_2d(np.asarray(Psi, dtype=float))
    Y = np.asarray(Y, dtype=float).ravel()
    if Psi.shape[1] != Y.size:
        raise DataError(f"Psi has {Psi.shape[1]} columns but Y has {Y.size} entries")
    return Y @ pinv(Psi)


def squared_error(W, Psi, Y) -> float:
    r = np.asarray(Y, dtype=float).ravel() - np.asarray(W, dtype=float) @ np.asarray(Psi, dtype=float)
    return float(r @ r)
