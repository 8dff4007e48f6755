"""Log-det barrier interior-point method for small dense SDPs.

Problem form (all blocks strict):

    minimize    c @ x
    subject to  F0_k + sum_i x_i F_ik  > 0       for every LMI block k
                g0 + G @ x              > 0       (optional linear rows)

Block sizes up to a few dozen and up to ~100 scalar variables are the
intended scale. Every returned point is strictly feasible; its smallest
block eigenvalues are reported so callers can re-verify independently.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..errors import DimensionError


class SdpStatus(enum.Enum):
    OPTIMAL = "optimal"
    FEASIBLE = "feasible"          # strictly feasible point, objective not optimized
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    MAX_ITER = "max_iterations"


@dataclass
class LmiBlock:
    F0: np.ndarray
    F: np.ndarray   # (m, k, k)
    name: str = ""

    def __post_init__(self):
        self.F0 = np.atleast_2d(np.asarray(self.F0, dtype=float))
        self.F = np.asarray(self.F, dtype=float)
        k = self.F0.shape[0]
        if self.F.ndim != 3 or self.F.shape[1:] != (k, k):
            raise DimensionError(f"block {self.name!r}: F has shape {self.F.shape}, F0 is {k}x{k}")

    @property
    def size(self) -> int:
        return self.F0.shape[0]

    def value(self, x) -> np.ndarray:
        M = self.F0 + np.tensordot(x, self.F, axes=1)
        return 0.5 * (M + M.T)


@dataclass
class SdpProblem:
    c: np.ndarray
    blocks: Sequence[LmiBlock]
    g0: Optional[np.ndarray] = None
    G: Optional[np.ndarray] = None
    x0: Optional[np.ndarray] = None

    def __post_init__(self):
        self.c = np.atleast_1d(np.asarray(self.c, dtype=float))
        m = self.c.size
        for b in self.blocks:
            if b.F.shape[0] != m:
                raise DimensionError(f"block {b.name!r} has {b.F.shape[0]} coefficient matrices, expected {m}")
        if self.G is None:
            self.G = np.zeros((0, m))
            self.g0 = np.zeros(0)
        else:
            self.G = np.atleast_2d(np.asarray(self.G, dtype=float))
            self.g0 = np.atleast_1d(np.asarray(self.g0, dtype=float))

    @property
    def n_vars(self) -> int:
        return self.c.size

    @property
    def barrier_degree(self) -> int:
        return sum(b.size for b in self.blocks) + self.G.shape[0]

    def margins(self, x) -> list[float]:
        out = [float(np.linalg.eigvalsh(b.value(x))[0]) for b in self.blocks]
        if self.G.shape[0]:
            out.append(float(np.min(self.g0 + self.G @ x)))
        return out


@dataclass
class SdpResult:
    status: SdpStatus
    x: Optional[np.ndarray] = None
    fun: Optional[float] = None
    margins: list = field(default_factory=list)
    gap: float = np.inf
    iterations: int = 0
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status in (SdpStatus.OPTIMAL, SdpStatus.FEASIBLE)


class _Barrier:
    def __init__(self, problem: SdpProblem):
        self.p = problem

    def chol_all(self, x):
        out = []
        for b in self.p.blocks:
            try:
                out.append(np.linalg.cholesky(b.value(x)))
            except np.linalg.LinAlgError:
                return None
        if self.p.G.shape[0] and np.any(self.p.g0 + self.p.G @ x <= 0):
            return None
        return out

    def value(self, x, t, chols):
        v = t * float(self.p.c @ x)
        for L in chols:
            v -= 2.0 * np.sum(np.log(np.diag(L)))
        if self.p.G.shape[0]:
            v -= np.sum(np.log(self.p.g0 + self.p.G @ x))
        return v

    def grad_hess(self, x, t, chols):
        m = self.p.n_vars
        g = t * self.p.c.copy()
        H = np.zeros((m, m))
        for b, L in zip(self.p.blocks, chols):
            Linv = np.linalg.inv(L)
            Gi = Linv @ b.F @ Linv.T          # (m, k, k)
            g -= np.trace(Gi, axis1=1, axis2=2)
            flat = Gi.reshape(m, -1)
            H += flat @ flat.T
        if self.p.G.shape[0]:
            s = self.p.g0 + self.p.G @ x
            Gs = self.p.G / s[:, None]
            g -= Gs.sum(axis=0)
            H += Gs.T @ Gs
        return g, H


def _center(bar: _Barrier, x, t, max_newton, tol=1e-10, stop=None):
    """Damped Newton on the barrier-augmented objective; returns (x, iters, ok).

    A failed line search at a small Newton decrement means the iterate is
    centered to working precision and counts as success.
    """
    chols = bar.chol_all(x)
    f = bar.value(x, t, chols)
    for it in range(max_newton):
        if stop is not None and stop(x):
            return x, it, True
        g, H = bar.grad_hess(x, t, chols)
        reg = 1e-14 * max(1.0, np.max(np.abs(np.diag(H))))
        try:
            dx = -np.linalg.solve(H + reg * np.eye(H.shape[0]), g)
        except np.linalg.LinAlgError:
            dx = -np.linalg.lstsq(H, g, rcond=None)[0]
        dec2 = float(-g @ dx)
        # barrier values carry rounding of order eps * |f| once t is large
        if dec2 / 2.0 <= max(tol, 1e-13 * abs(f)):
            return x, it, True
        step = 1.0
        while step > 1e-14:
            xn = x + step * dx
            cn = bar.chol_all(xn)
            if cn is not None:
                fn = bar.value(xn, t, cn)
                if fn <= f - 0.25 * step * dec2:
                    break
            step *= 0.5
        else:
            return x, it, dec2 < 1e-2
        x, chols, f = xn, cn, fn
    return x, max_newton, False


def _barrier_minimize(problem, x, gap_tol, max_outer, max_newton, t0=1.0, mu=10.0, stop=None):
    bar = _Barrier(problem)
    t = t0
    nu = problem.barrier_degree
    total = 0
    for _ in range(max_outer):
        x, iters, ok = _center(bar, x, t, max_newton, stop=stop)
        total += iters
        if stop is not None and stop(x):
            return x, total, "stopped", nu / t
        if not ok:
            return x, total, "max_iter", nu / t
        if np.max(np.abs(x)) > 1e12:
            return x, total, "unbounded", nu / t
        obj = abs(float(problem.c @ x))
        if nu / t < gap_tol * max(1.0, obj):
            return x, total, "converged", nu / t
        t *= mu
    return x, total, "max_iter", nu / t


def _phase_one(problem: SdpProblem, x0, box, max_outer, max_newton):
    """Find a strictly feasible point by minimizing s with F(x) + s I > 0."""
    m = problem.n_vars
    blocks = []
    for b in problem.blocks:
        k = b.size
        F = np.concatenate([b.F, np.eye(k)[None]], axis=0)
        blocks.append(LmiBlock(b.F0, F, b.name))
    nG = problem.G.shape[0]
    rows = [np.hstack([problem.G, np.ones((nG, 1))])] if nG else []
    rhs = [problem.g0] if nG else []
    # s >= -1 keeps the auxiliary problem bounded; |x_i| <= box keeps x bounded
    rows.append(np.hstack([np.zeros((1, m)), np.ones((1, 1))]))
    rhs.append(np.ones(1))
    rows.append(np.hstack([np.eye(m), np.zeros((m, 1))]))
    rhs.append(np.full(m, box))
    rows.append(np.hstack([-np.eye(m), np.zeros((m, 1))]))
    rhs.append(np.full(m, box))
    G = np.vstack(rows)
    g0 = np.concatenate(rhs)
    c = np.zeros(m + 1)
    c[-1] = 1.0
    aux = SdpProblem(c, blocks, g0, G)

    worst = min(problem.margins(x0)) if (problem.blocks or nG) else 1.0
    s0 = max(0.0, -worst) + 1.0
    z0 = np.concatenate([x0, [s0]])
    target = -1e-9

    def feasible(z):
        return z[-1] < target and min(problem.margins(z[:-1])) > 0.0

    z, iters, why, _ = _barrier_minimize(aux, z0, 1e-12, max_outer, max_newton, stop=feasible)
    if feasible(z):
        return z[:-1], iters, None
    return None, iters, float(z[-1])


def sdp_solve(problem: SdpProblem, gap_tol: float = 1e-9, box: float = 1e6,
              feasibility_only: bool = False, max_outer: int = 60,
              max_newton: int = 200) -> SdpResult:
    m = problem.n_vars
    x = np.zeros(m) if problem.x0 is None else np.asarray(problem.x0, dtype=float).copy()
    total = 0
    bar = _Barrier(problem)
    if bar.chol_all(x) is None:
        x, iters, s_star = _phase_one(problem, x, box, max_outer, max_newton)
        total += iters
        if x is None:
            return SdpResult(SdpStatus.INFEASIBLE, iterations=total,
                             message=f"phase-one optimum s* = {s_star:.3e} >= 0: no strictly feasible point")
    if feasibility_only:
        return SdpResult(SdpStatus.FEASIBLE, x=x, fun=float(problem.c @ x),
                         margins=problem.margins(x), iterations=total)
    x, iters, why, gap = _barrier_minimize(problem, x, gap_tol, max_outer, max_newton)
    total += iters
    if why == "unbounded":
        return SdpResult(SdpStatus.UNBOUNDED, x=x, iterations=total, message="iterates diverged")
    status = SdpStatus.OPTIMAL if why == "converged" else SdpStatus.MAX_ITER
    return SdpResult(status, x=x, fun=float(problem.c @ x), margins=problem.margins(x),
                     gap=gap, iterations=total)


def sym_basis(n: int) -> np.ndarray:
    """Basis (n(n+1)/2, n, n) of symmetric matrices: E_ii and E_ij + E_ji."""
    out = []
    for i in range(n):
        for j in range(i, n):
            E = np.zeros((n, n))
            E[i, j] = E[j, i] = 1.0
            out.append(E)
    return np.array(out)


def sym_from_vec(v, n: int) -> np.ndarray:
    return np.tensordot(v, sym_basis(n), axes=1)


def vec_from_sym(M) -> np.ndarray:
    n = M.shape[0]
    return np.array([M[i, j] for i in range(n) for j in range(i, n)])
