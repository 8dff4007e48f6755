"""Dense symmetric eigensolver and compact SVD wrappers with contract checks."""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError


def sym_eig(M, sym_tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and orthonormal eigenvectors of a symmetric matrix."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {M.shape}")
    scale = max(1.0, np.max(np.abs(M))) if M.size else 1.0
    if np.max(np.abs(M - M.T), initial=0.0) > sym_tol * scale:
        raise ValueError("matrix is not symmetric")
    return np.linalg.eigh(0.5 * (M + M.T))


def min_eig(M) -> float:
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])


def max_eig(M) -> float:
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[-1])


def compact_svd(M, rtol: float = 1e-12) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """M = U @ diag(s) @ Y.T with singular values below rtol * s_max discarded."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        k = 0
    else:
        k = int(np.sum(s > rtol * s[0]))
    return U[:, :k], s[:k], Vt[:k].T
