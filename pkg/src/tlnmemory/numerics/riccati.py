"""Continuous-time algebraic Riccati equation via the ordered Schur form of
the Hamiltonian matrix (stable invariant subspace)."""

from __future__ import annotations

import numpy as np
import scipy.linalg

from ..errors import NotStabilizableError


def care_solve(A, B, Q, R, residual_tol: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    """Solve A'P + PA - P B R^-1 B' P + Q = 0 and return (P, K = R^-1 B' P)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    n = A.shape[0]
    Rinv_Bt = np.linalg.solve(R, B.T)
    H = np.block([[A, -B @ Rinv_Bt], [-Q, -A.T]])
    T, Z, sdim = scipy.linalg.schur(H, output="real", sort="lhp")
    eig = np.linalg.eigvals(H)
    if sdim != n or np.min(np.abs(eig.real)) < 1e-10 * max(1.0, np.max(np.abs(eig))):
        raise NotStabilizableError("Hamiltonian has eigenvalues on the imaginary axis; (A, B) not stabilizable")
    X1, X2 = Z[:n, :n], Z[n:, :n]
    if np.linalg.cond(X1) > 1e12:
        raise NotStabilizableError("stable invariant subspace is not a graph; (A, B) not stabilizable")
    P = np.linalg.solve(X1.T, X2.T).T
    P = 0.5 * (P + P.T)
    K = Rinv_Bt @ P
    res = care_residual(A, B, Q, R, P)
    scale = max(1.0, np.max(np.abs(Q)), np.max(np.abs(P)))
    if res > residual_tol * scale:
        # one Newton (Kleinman) refinement step
        Acl = A - B @ K
        P = scipy.linalg.solve_continuous_lyapunov(Acl.T, -(Q + K.T @ R @ K))
        P = 0.5 * (P + P.T)
        K = Rinv_Bt @ P
    if np.max(np.linalg.eigvals(A - B @ K).real) >= 0:
        raise NotStabilizableError("closed loop A - BK is not Hurwitz")
    return P, K


def care_residual(A, B, Q, R, P) -> float:
    res = A.T @ P + P @ A - P @ B @ np.linalg.solve(R, B.T) @ P + Q
    return float(np.max(np.abs(res)))
