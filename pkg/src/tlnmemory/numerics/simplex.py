"""Dense two-phase tableau simplex with Bland's anti-cycling rule.

Intended for the tiny certification LPs (tens of variables). Problems are
posed as

    minimize    c @ x
    subject to  A_ub @ x <= b_ub
                A_eq @ x == b_eq
                lb <= x <= ub        (entries may be +-inf)
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import DimensionError


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL = "numerical_breakdown"


@dataclass
class LpProblem:
    c: np.ndarray
    A_ub: Optional[np.ndarray] = None
    b_ub: Optional[np.ndarray] = None
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    lb: Optional[np.ndarray] = None
    ub: Optional[np.ndarray] = None

    def __post_init__(self):
        self.c = np.atleast_1d(np.asarray(self.c, dtype=float))
        nv = self.c.size
        self.A_ub, self.b_ub = _rows(self.A_ub, self.b_ub, nv, "ub")
        self.A_eq, self.b_eq = _rows(self.A_eq, self.b_eq, nv, "eq")
        self.lb = np.zeros(nv) if self.lb is None else np.broadcast_to(
            np.asarray(self.lb, dtype=float), (nv,)).copy()
        self.ub = np.full(nv, np.inf) if self.ub is None else np.broadcast_to(
            np.asarray(self.ub, dtype=float), (nv,)).copy()
        for arr in (self.c, self.A_ub, self.b_ub, self.A_eq, self.b_eq):
            if not np.all(np.isfinite(arr)):
                raise ValueError("LP data must be finite")
        if np.any(self.lb > self.ub):
            raise ValueError("lower bound exceeds upper bound")

    @property
    def n_vars(self) -> int:
        return self.c.size


def _rows(A, b, nv, tag):
    if A is None:
        return np.zeros((0, nv)), np.zeros(0)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if A.shape[1] != nv or A.shape[0] != b.size:
        raise DimensionError(f"A_{tag} has shape {A.shape}, b_{tag} has {b.size} entries, {nv} variables")
    return A, b


@dataclass
class LpResult:
    status: LpStatus
    x: Optional[np.ndarray] = None
    fun: Optional[float] = None
    iterations: int = 0
    # Farkas multipliers (u >= 0 on A_ub rows, v free on A_eq rows) when infeasible
    farkas_ub: Optional[np.ndarray] = None
    farkas_eq: Optional[np.ndarray] = None
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status is LpStatus.OPTIMAL


@dataclass
class _StandardForm:
    # x = offset + T @ xs, xs >= 0
    T: np.ndarray
    offset: np.ndarray
    R: np.ndarray          # inequality rows (incl. finite-range bound rows)
    h: np.ndarray
    E: np.ndarray
    e: np.ndarray
    n_orig_ub: int
    cost: np.ndarray
    cost0: float


def _standardize(p: LpProblem) -> _StandardForm:
    nv = p.n_vars
    cols, offset = [], np.zeros(nv)
    bound_rows = []
    for j in range(nv):
        lo, hi = p.lb[j], p.ub[j]
        if np.isfinite(lo):
            offset[j] = lo
            col = np.zeros(nv)
            col[j] = 1.0
            cols.append(col)
            if np.isfinite(hi):
                bound_rows.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            offset[j] = hi
            col = np.zeros(nv)
            col[j] = -1.0
            cols.append(col)
        else:
            col = np.zeros(nv)
            col[j] = 1.0
            cols.append(col)
            cols.append(-col)
    T = np.array(cols).T if cols else np.zeros((nv, 0))
    ns = T.shape[1]
    R = p.A_ub @ T
    h = p.b_ub - p.A_ub @ offset
    if bound_rows:
        extra = np.zeros((len(bound_rows), ns))
        for r, (k, width) in enumerate(bound_rows):
            extra[r, k] = 1.0
        R = np.vstack([R, extra])
        h = np.concatenate([h, [w for _, w in bound_rows]])
    E = p.A_eq @ T
    e = p.b_eq - p.A_eq @ offset
    return _StandardForm(T, offset, R, h, E, e, p.A_ub.shape[0], T.T @ p.c, float(p.c @ offset))


class _Tableau:
    """Row-reduced tableau [A | b] with an explicit basis list."""

    def __init__(self, A, b, basis, tol):
        self.A = A
        self.b = b
        self.basis = basis
        self.tol = tol
        self.iterations = 0

    def pivot(self, r, j):
        piv = self.A[r, j]
        self.A[r] /= piv
        self.b[r] /= piv
        col = self.A[:, j].copy()
        col[r] = 0.0
        self.A -= np.outer(col, self.A[r])
        self.b -= col * self.b[r]
        self.basis[r] = j
        self.iterations += 1

    def reduced_costs(self, cost):
        cb = cost[self.basis]
        return cost - cb @ self.A, float(cb @ self.b)

    def run(self, cost, allowed, max_iter):
        """Bland's rule; returns 'optimal', 'unbounded' or 'iterations'."""
        for _ in range(max_iter):
            red, _ = self.reduced_costs(cost)
            scale = max(1.0, np.max(np.abs(cost)))
            enter = next((j for j in np.flatnonzero(allowed) if red[j] < -self.tol * scale), None)
            if enter is None:
                return "optimal"
            col = self.A[:, enter]
            pos = col > self.tol
            if not np.any(pos):
                return "unbounded"
            ratios = np.full(col.shape, np.inf)
            ratios[pos] = self.b[pos] / col[pos]
            best = np.min(ratios)
            ties = np.flatnonzero(ratios <= best + self.tol * max(1.0, abs(best)))
            leave = min(ties, key=lambda r: self.basis[r])
            self.pivot(leave, enter)
        return "iterations"


def lp_solve(p: LpProblem, tol: float = 1e-10, max_iter: int = 5000) -> LpResult:
    sf = _standardize(p)
    m_ub, m_eq = sf.R.shape[0], sf.E.shape[0]
    ns = sf.T.shape[1]
    m = m_ub + m_eq

    # columns: structural | slacks (ub rows) | artificials (as needed)
    A = np.zeros((m, ns + m_ub))
    A[:m_ub, :ns] = sf.R
    A[:m_ub, ns:] = np.eye(m_ub)
    A[m_ub:, :ns] = sf.E
    b = np.concatenate([sf.h, sf.e])
    sign = np.where(b < 0, -1.0, 1.0)
    A *= sign[:, None]
    b = b * sign

    basis, art_rows = [], []
    for i in range(m):
        if i < m_ub and sign[i] > 0:
            basis.append(ns + i)
        else:
            art_rows.append(i)
            basis.append(None)
    n_art = len(art_rows)
    A = np.hstack([A, np.zeros((m, n_art))])
    for k, i in enumerate(art_rows):
        A[i, ns + m_ub + k] = 1.0
        basis[i] = ns + m_ub + k
    ncol = A.shape[1]
    art_mask = np.zeros(ncol, dtype=bool)
    art_mask[ns + m_ub:] = True

    A0 = A.copy()
    tab = _Tableau(A, b, basis, tol)
    data_scale = max(1.0, np.max(np.abs(b)) if b.size else 1.0)

    if n_art:
        cost1 = art_mask.astype(float)
        status = tab.run(cost1, np.ones(ncol, dtype=bool), max_iter)
        if status == "iterations":
            return LpResult(LpStatus.NUMERICAL, iterations=tab.iterations, message="phase 1 iteration limit")
        _, phase1 = tab.reduced_costs(cost1)
        if phase1 > 1e-8 * data_scale:
            u, v = _phase1_farkas(A0, tab.basis, cost1, sign, m_ub, sf.n_orig_ub, m_eq)
            return LpResult(LpStatus.INFEASIBLE, iterations=tab.iterations, farkas_ub=u, farkas_eq=v,
                            message=f"phase 1 optimum {phase1:.3e} > 0")
        # drive zero-level artificials out of the basis
        keep = np.ones(m, dtype=bool)
        for r in range(m):
            if art_mask[tab.basis[r]]:
                cand = np.flatnonzero((np.abs(tab.A[r]) > 1e-9) & ~art_mask)
                if cand.size:
                    tab.pivot(r, cand[0])
                else:
                    keep[r] = False
        tab.A, tab.b = tab.A[keep], tab.b[keep]
        tab.basis = [bj for bj, k in zip(tab.basis, keep) if k]

    cost2 = np.zeros(ncol)
    cost2[:ns] = sf.cost
    allowed = ~art_mask
    status = tab.run(cost2, allowed, max_iter)
    if status == "iterations":
        return LpResult(LpStatus.NUMERICAL, iterations=tab.iterations, message="phase 2 iteration limit")
    if status == "unbounded":
        return LpResult(LpStatus.UNBOUNDED, iterations=tab.iterations, message="objective unbounded below")
    z = np.zeros(ncol)
    z[tab.basis] = tab.b
    x = sf.offset + sf.T @ z[:ns]
    if not np.all(np.isfinite(x)):
        return LpResult(LpStatus.NUMERICAL, iterations=tab.iterations, message="non-finite solution")
    return LpResult(LpStatus.OPTIMAL, x=x, fun=float(p.c @ x), iterations=tab.iterations)


def _phase1_farkas(A0, basis, cost1, sign, m_ub, n_orig_ub, m_eq):
    """Multipliers from the phase-1 optimal basis, mapped to the unflipped rows.

    With y the phase-1 duals, y @ A0_j <= 0 on every non-artificial column and
    y @ b > 0, so u = -(sign * y) restricted to the original rows certifies that
    no feasible point exists (bound rows are re-derived from the box).
    """
    B = A0[:, basis]
    y = np.linalg.lstsq(B.T, cost1[basis], rcond=None)[0]
    yh = -(y * sign)
    return np.maximum(yh[:n_orig_ub], 0.0), yh[m_ub:m_ub + m_eq]


def check_farkas(p: LpProblem, u: np.ndarray, v: np.ndarray) -> float:
    """Return the infeasibility gap certified by multipliers (u >= 0, v).

    For every x in the box, g @ x >= min_box(g @ x) while feasibility would need
    g @ x <= u @ b_ub + v @ b_eq with g = A_ub.T u + A_eq.T v. A positive return
    value proves the problem infeasible.
    """
    g = p.A_ub.T @ u + p.A_eq.T @ v
    rhs = float(p.b_ub @ u + p.b_eq @ v)
    low = 0.0
    for gj, lo, hi in zip(g, p.lb, p.ub):
        if abs(gj) < 1e-14:
            continue
        bound = lo if gj > 0 else hi
        if not np.isfinite(bound):
            return -np.inf
        low += gj * bound
    return low - rhs
