"""Sector-bound ellipsoid certificate (Lyapunov SDP over an alpha grid).

For a fixed domain D = {z'Ez <= alpha^2} the local slope bounds of the
rectifier give a quadratic constraint that holds on D. The SDP searches for
P > 0 and multipliers lam >= 0 with

    [[-2P + eps I, P], [P, 0]] + M_kappa(lam) < 0     (decrease on D)
    E / alpha^2 <= P                                  (ellipsoid inside D)
    L'PL <= t I                                       (noise ball inside ellipsoid)

and minimizes t, so that every encoder-side noise of norm below r = 1/sqrt(t)
lands inside the certified ellipsoid. The variables are solved in the scaled
form P~ = alpha^2 P, lam~ = alpha^2 lam, t~ = alpha^2 t, which keeps the
problem well conditioned across the grid.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import DegenerateEncoderError, NoCertificateError, SolverError
from ..numerics import LmiBlock, SdpProblem, SdpStatus, compact_svd, sdp_solve
from ..numerics.sdp import sym_basis, sym_from_vec
from .shifted import SectorBounds, ShiftedSystem, build_qc, sector_bounds

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SdpSearchConfig:
    n_alpha: int = 24
    alpha_min: float = 1e-3
    # upper end of the grid as a multiple of c
    alpha_max_factor: float = 2.0
    eps_lmi: float = 1e-6
    # extra eigenvalue margin (scaled units) imposed on every block
    margin: float = 1e-7
    verify_tol: float = 1e-9
    gap_tol: float = 1e-9


@dataclass
class SdpCertificate:
    P_lyap: np.ndarray
    lam: np.ndarray
    E: np.ndarray
    alpha: float
    r: float
    t: float
    margins: dict
    verified: bool
    bounds: Optional[SectorBounds] = None
    grid: list = field(default_factory=list)

    def contains(self, z) -> np.ndarray:
        """Whether shifted states z lie in the ellipsoid z'Pz <= 1."""
        z = np.atleast_2d(z)
        return np.einsum("bi,ij,bj->b", z, self.P_lyap, z) <= 1.0

    def to_json(self) -> dict:
        n = self.P_lyap.shape[0]
        return {
            "method": "sdp", "n": n, "alpha": self.alpha, "r": self.r, "t": self.t,
            "P": {"rows": n, "cols": n, "data": self.P_lyap.ravel().tolist()},
            "lambda": self.lam.tolist(),
            "E": {"rows": n, "cols": n, "data": self.E.ravel().tolist()},
            "margins": self.margins, "verified": self.verified,
            "grid": self.grid,
        }


def encoder_factor(W_E) -> np.ndarray:
    """L = Y Sigma from the compact SVD W_E = U Sigma Y' (zero singular values dropped)."""
    _, s, Y = compact_svd(W_E)
    if s.size == 0:
        raise DegenerateEncoderError("encoder is identically zero")
    return Y * s


def lmi_matrices(sys: ShiftedSystem, bounds: SectorBounds, P, lam, t, E, alpha, L, eps_lmi):
    """The three LMI left-hand sides in original scaling; each must be negative definite."""
    n = sys.n
    I = np.eye(n)
    Mk = build_qc(bounds.s_alpha, bounds.s_beta, lam, sys.net.W)
    a = np.block([[-2.0 * P + eps_lmi * I, P], [P, np.zeros((n, n))]]) + Mk
    b = E / alpha ** 2 - P
    c = L.T @ P @ L - t * np.eye(L.shape[1])
    return {"decrease": 0.5 * (a + a.T), "domain": 0.5 * (b + b.T), "noise": 0.5 * (c + c.T)}


def verify(sys, bounds, P, lam, t, E, alpha, L, eps_lmi, tol=1e-9) -> tuple[dict, bool]:
    """Independent eigenvalue check: every LMI's largest eigenvalue must be <= -tol."""
    mats = lmi_matrices(sys, bounds, P, lam, t, E, alpha, L, eps_lmi)
    margins = {k: float(np.linalg.eigvalsh(M)[-1]) for k, M in mats.items()}
    margins["lambda_min"] = float(np.min(lam))
    ok = all(margins[k] <= -tol for k in ("decrease", "domain", "noise")) and margins["lambda_min"] >= 0
    ok = ok and float(np.linalg.eigvalsh(P)[0]) > 0
    return margins, ok


def _problem(sys, bounds, E, alpha, L, cfg: SdpSearchConfig) -> SdpProblem:
    n, k = sys.n, L.shape[1]
    basis = sym_basis(n)                     # (np, n, n)
    n_p = basis.shape[0]
    m = n_p + n + 1
    mu = cfg.margin
    I2 = np.eye(2 * n)
    Z = np.zeros((n, n))

    # decrease block: -( [[-2P + eps a^2 I, P], [P, 0]] + M_kappa(lam) ) - mu I > 0
    F0a = -np.block([[cfg.eps_lmi * alpha ** 2 * np.eye(n), Z], [Z, Z]]) - mu * I2
    Fa = np.zeros((m, 2 * n, 2 * n))
    for j, Eb in enumerate(basis):
        Fa[j] = -np.block([[-2.0 * Eb, Eb], [Eb, Z]])
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        Fa[n_p + i] = -build_qc(bounds.s_alpha, bounds.s_beta, e, sys.net.W)

    # domain block: P - E - mu I > 0
    Fb = np.zeros((m, n, n))
    Fb[:n_p] = basis
    F0b = -E - mu * np.eye(n)

    # noise block: t I - L'PL - mu I > 0
    Fc = np.zeros((m, k, k))
    for j, Eb in enumerate(basis):
        Fc[j] = -L.T @ Eb @ L
    Fc[-1] = np.eye(k)
    F0c = -mu * np.eye(k)

    G = np.zeros((n, m))
    G[:, n_p:n_p + n] = np.eye(n)
    c = np.zeros(m)
    c[-1] = 1.0
    x0 = np.zeros(m)
    x0[:n_p] = np.array([2.0 if i == j else 0.0 for i in range(n) for j in range(i, n)])
    x0[n_p:n_p + n] = 1.0
    x0[-1] = 10.0 * (1.0 + np.max(np.linalg.eigvalsh(L.T @ L)))
    return SdpProblem(c, [LmiBlock(F0a, Fa, "decrease"), LmiBlock(F0b, Fb, "domain"),
                          LmiBlock(F0c, Fc, "noise")], np.zeros(n), G, x0)


def solve_at_alpha(sys: ShiftedSystem, L, alpha: float, E=None,
                   cfg: Optional[SdpSearchConfig] = None) -> Optional[SdpCertificate]:
    """Best certificate for one domain size, or None when the SDP is infeasible."""
    cfg = cfg or SdpSearchConfig()
    n = sys.n
    E = np.eye(n) if E is None else np.asarray(E, dtype=float)
    bounds = sector_bounds(sys, E, alpha)
    prob = _problem(sys, bounds, E, alpha, L, cfg)
    res = sdp_solve(prob, gap_tol=cfg.gap_tol)
    if res.status is SdpStatus.INFEASIBLE:
        return None
    if res.x is None or res.status not in (SdpStatus.OPTIMAL, SdpStatus.MAX_ITER):
        raise SolverError(f"SDP at alpha={alpha:.4g} ended with status {res.status.value}")
    n_p = n * (n + 1) // 2
    P_s = sym_from_vec(res.x[:n_p], n)
    lam_s = res.x[n_p:n_p + n]
    t_s = float(res.x[-1])
    a2 = alpha ** 2
    P, lam, t = P_s / a2, np.maximum(lam_s, 0.0) / a2, t_s / a2
    margins, ok = verify(sys, bounds, P, lam, t, E, alpha, L, cfg.eps_lmi, cfg.verify_tol)
    return SdpCertificate(P, lam, E, float(alpha), 1.0 / np.sqrt(t), t, margins, ok, bounds)


def alpha_grid(c: float, cfg: SdpSearchConfig) -> np.ndarray:
    return np.geomspace(cfg.alpha_min, cfg.alpha_max_factor * c, cfg.n_alpha)


def certify_sdp(sys: ShiftedSystem, W_E, cfg: Optional[SdpSearchConfig] = None,
                E=None) -> SdpCertificate:
    """Maximize the certified radius over the alpha grid.

    Certificates failing the independent eigenvalue re-verification are
    discarded whatever the solver reported.
    """
    cfg = cfg or SdpSearchConfig()
    L = encoder_factor(W_E)
    best, grid = None, []
    failures = 0
    for alpha in alpha_grid(sys.net.params.c, cfg):
        try:
            cert = solve_at_alpha(sys, L, alpha, E, cfg)
        except SolverError as exc:
            log.warning("%s", exc)
            failures += 1
            grid.append({"alpha": float(alpha), "status": "solver_failure"})
            continue
        if cert is None:
            grid.append({"alpha": float(alpha), "status": "infeasible"})
            continue
        grid.append({"alpha": float(alpha), "status": "verified" if cert.verified else "rejected",
                     "r": float(cert.r)})
        if cert.verified and (best is None or cert.r > best.r):
            best = cert
    if best is None:
        if failures == len(grid):
            raise SolverError("SDP solver failed at every alpha")
        raise NoCertificateError("no verified SDP certificate on the alpha grid")
    best.grid = grid
    return best
