"""Shifted dynamics about an attractor and local sector bounds of the rectifier."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NotEquilibriumError, ParameterError
from ..network import Network, drive, vector_field

# sup-norm of the field above which x_star is rejected as an equilibrium
EQUILIBRIUM_TOL = 1e-8


@dataclass(frozen=True)
class ShiftedSystem:
    """z' = -z + phi(z), phi(z) = [W z + y*]_+ - [y*]_+, with z = x - x*."""

    net: Network
    x_star: np.ndarray
    y_star: np.ndarray

    @property
    def n(self) -> int:
        return self.net.n

    def phi(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return np.maximum(z @ self.net.W + self.y_star, 0.0) - np.maximum(self.y_star, 0.0)

    def field(self, z) -> np.ndarray:
        return -np.asarray(z, dtype=float) + self.phi(z)

    def active(self) -> np.ndarray:
        return (self.y_star > 0).astype(float)


@dataclass(frozen=True)
class SectorBounds:
    v_lo: np.ndarray
    v_hi: np.ndarray
    s_alpha: np.ndarray
    s_beta: np.ndarray


def shift_about(net: Network, x_star, tol: float = EQUILIBRIUM_TOL) -> ShiftedSystem:
    x_star = np.asarray(x_star, dtype=float)
    res = float(np.max(np.abs(vector_field(net, x_star))))
    if res > tol:
        raise NotEquilibriumError(f"field norm {res:.3e} at x_star exceeds {tol:.1e}")
    return ShiftedSystem(net, x_star.copy(), drive(net, x_star))


def preactivation_interval(sys: ShiftedSystem, E, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Range of y_i = w_i'z + y*_i over the ellipsoid z'Ez <= alpha^2."""
    if not alpha > 0:
        raise ParameterError("alpha must be positive")
    E = np.asarray(E, dtype=float)
    try:
        Einv_W = np.linalg.solve(E, sys.net.W.T)       # columns E^-1 w_i
    except np.linalg.LinAlgError as exc:
        raise ParameterError("E is singular") from exc
    q = np.einsum("ij,ji->i", sys.net.W, Einv_W)
    if np.any(q < 0):
        raise ParameterError("E is not positive definite")
    half = alpha * np.sqrt(q)
    return sys.y_star - half, sys.y_star + half


def local_slopes(y_star, v_lo, v_hi) -> tuple[np.ndarray, np.ndarray]:
    """Chord-slope bounds of v -> [v]_+ - [y*]_+ about y* over [v_lo, v_hi]."""
    y = np.asarray(y_star, dtype=float)
    lo = np.asarray(v_lo, dtype=float)
    hi = np.asarray(v_hi, dtype=float)
    if np.any(lo > y) or np.any(hi < y):
        raise ParameterError("interval must contain y*")
    s_a = np.zeros_like(y)
    s_b = np.zeros_like(y)
    pos = y > 0
    s_b[pos] = 1.0
    s_a[pos] = np.where(lo[pos] >= 0, 1.0, y[pos] / (y[pos] - lo[pos]))
    neg = ~pos
    reach = neg & (hi > 0)
    s_b[reach] = hi[reach] / (hi[reach] - y[reach])
    return s_a, s_b


def sector_bounds(sys: ShiftedSystem, E, alpha: float) -> SectorBounds:
    lo, hi = preactivation_interval(sys, E, alpha)
    s_a, s_b = local_slopes(sys.y_star, lo, hi)
    return SectorBounds(lo, hi, s_a, s_b)


def build_qc(s_alpha, s_beta, lam, W) -> np.ndarray:
    """M_kappa = [W 0; 0 I]' Psi' M(lam) Psi [W 0; 0 I] acting on [z; phi]."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise ParameterError("multipliers must be nonnegative")
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    I = np.eye(n)
    Z = np.zeros((n, n))
    Psi = np.block([[np.diag(s_beta), -I], [-np.diag(s_alpha), I]])
    L = np.diag(lam)
    M = np.block([[Z, L], [L, Z]])
    T = np.block([[W, Z], [Z, I]])
    out = T.T @ Psi.T @ M @ Psi @ T
    return 0.5 * (out + out.T)


def qc_value(sys: ShiftedSystem, bounds: SectorBounds, lam, z) -> np.ndarray:
    """[z; phi(z)]' M_kappa [z; phi(z)] for a batch of z (nonnegative inside the domain)."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    M = build_qc(bounds.s_alpha, bounds.s_beta, lam, sys.net.W)
    zp = np.hstack([z, sys.phi(z)])
    return np.einsum("bi,ij,bj->b", zp, M, zp)
