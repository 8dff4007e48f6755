"""Forward-invariant polytopes, separating hyperplanes and the LP radius certificate.

For a center index i (2 <= i <= n-1) and levels (alpha, beta) the set

    R_FI(i) = { x : y_i >= alpha, y_{i-1} <= beta, y_{i+1} <= beta, y_k <= 0 otherwise },
    y = W x + theta,

is forward invariant when (alpha, beta) satisfy three linear inequalities. It
contains the attractors with supports {i-1, i} and {i, i+1} and the saddle
with support {i-1, i, i+1}. The invariant hyperplane through the saddle,
phi(x) = w'x = 0 with w the left eigenvector for the unstable eigenvalue,
splits it into one region of attraction inner approximation per attractor.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import DegenerateEncoderError, IndexRangeError
from ..network import CstlnParams, Network, SupportSet
from ..numerics import LpProblem, LpStatus, lp_solve


class Side(enum.Enum):
    L = "L"
    R = "R"


@dataclass(frozen=True)
class FiRegion:
    """Feasible (alpha, beta) levels: G @ (alpha, beta) <= h with alpha, beta >= 0."""

    params: CstlnParams
    G: np.ndarray
    h: np.ndarray
    feasible: bool
    alpha_min: float
    alpha_max: float
    witness: Optional[np.ndarray] = None

    def contains(self, alpha: float, beta: float, tol: float = 1e-12) -> bool:
        v = np.array([alpha, beta])
        return bool(np.all(self.G @ v <= self.h + tol) and alpha >= -tol and beta >= -tol)

    def beta_range(self, alpha: float) -> tuple[float, float]:
        eps, c = self.params.epsilon, self.params.c
        return (eps - 1.0) * alpha + c, (c - alpha) / (2.0 * (1.0 - eps))

    def default_levels(self) -> tuple[float, float]:
        """Midpoint alpha and midpoint of the admissible beta interval."""
        if not self.feasible:
            raise ValueError("no admissible levels")
        a = 0.5 * (self.alpha_min + self.alpha_max)
        lo, hi = self.beta_range(a)
        return a, 0.5 * (max(lo, 0.0) + hi)


def alpha_max(params: CstlnParams) -> float:
    """Largest alpha compatible with the first two level constraints at minimal beta."""
    e, c = params.epsilon, params.c
    return c * (1.0 - 2.0 * e) / (1.0 + 2.0 * e ** 2 - 4.0 * e)


def fi_parameters(params: CstlnParams) -> FiRegion:
    """Solve the (alpha, beta) feasibility LP and describe the admissible polygon."""
    e, d, c = params.epsilon, params.delta, params.c
    G = np.array([[1.0, 2.0 * (1.0 - e)],      # alpha <= c + 2(-1+eps) beta
                  [e - 1.0, -1.0],             # (-1+eps) alpha + c <= beta
                  [-1.0, 0.0]])                # alpha >= c / (1 + delta)
    h = np.array([c, -c, -c / (1.0 + d)])
    res = lp_solve(LpProblem(np.array([-1.0, 0.0]), G, h))
    if res.status is LpStatus.INFEASIBLE:
        return FiRegion(params, G, h, False, np.nan, np.nan)
    if not res.ok:
        raise RuntimeError(f"level LP ended with status {res.status.value}")
    a_hi = float(res.x[0])
    return FiRegion(params, G, h, True, c / (1.0 + d), a_hi, res.x.copy())


@dataclass
class FiSet:
    i: int
    alpha_fi: float
    beta_fi: float
    A: np.ndarray
    b: np.ndarray
    # b = b0 + b_alpha * alpha + b_beta * beta
    b0: np.ndarray
    b_alpha: np.ndarray
    b_beta: np.ndarray
    labels: list
    params: Optional[CstlnParams] = None


def fi_rows(net: Network, i: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, list]:
    """Rows a'x <= b0 + b_alpha alpha + b_beta beta describing R_FI(i) in x-space."""
    n = net.n
    if n < 3 or not 2 <= i <= n - 1:
        raise IndexRangeError(f"center index must lie in [2, {n - 1}], got {i}")
    W, th = net.W, net.theta
    A, b0, ba, bb, labels = [], [], [], [], []
    for k in range(1, n + 1):
        w = W[k - 1]
        if k == i:          # -y_i <= -alpha
            A.append(-w)
            b0.append(th[k - 1])
            ba.append(-1.0)
            bb.append(0.0)
            labels.append(f"y{k}>=alpha")
        elif abs(k - i) == 1:   # y_k <= beta
            A.append(w)
            b0.append(-th[k - 1])
            ba.append(0.0)
            bb.append(1.0)
            labels.append(f"y{k}<=beta")
        else:
            A.append(w)
            b0.append(-th[k - 1])
            ba.append(0.0)
            bb.append(0.0)
            labels.append(f"y{k}<=0")
    return np.array(A), np.array(b0), np.array(ba), np.array(bb), labels


def build_fi_set(net: Network, i: int, alpha_fi: float, beta_fi: float) -> FiSet:
    A, b0, ba, bb, labels = fi_rows(net, i)
    return FiSet(i, alpha_fi, beta_fi, A, b0 + ba * alpha_fi + bb * beta_fi, b0, ba, bb, labels, net.params)


def separating_normal(net: Network, i: int) -> np.ndarray:
    """Left eigenvector of the {i-1, i, i+1} cell Jacobian for the eigenvalue delta.

    Normalized so the coefficient on i-1 is +1; phi(x) = w'x is then positive
    at the attractor with support {i-1, i}.
    """
    n = net.n
    if n < 3 or not 2 <= i <= n - 1:
        raise IndexRangeError(f"saddle index must lie in [2, {n - 1}], got {i}")
    e, d = net.params.epsilon, net.params.delta
    w = np.zeros(n)
    w[i - 2], w[i] = 1.0, -1.0
    side = (e + d) / (1.0 + d)
    if i - 3 >= 0:
        w[i - 3] = side
    if i + 1 <= n - 1:
        w[i + 1] = -side
    return w


@dataclass
class RoaPolyhedron:
    attractor_index: int        # support {m, m+1} has index m
    side: Side
    fi: FiSet
    w: np.ndarray
    # a'x <= b0 + b_alpha alpha + b_beta beta; the last row is the phi half-space
    A: np.ndarray
    b0: np.ndarray
    b_alpha: np.ndarray
    b_beta: np.ndarray
    labels: list

    def b(self, alpha: Optional[float] = None, beta: Optional[float] = None) -> np.ndarray:
        a = self.fi.alpha_fi if alpha is None else alpha
        bt = self.fi.beta_fi if beta is None else beta
        return self.b0 + self.b_alpha * a + self.b_beta * bt

    def contains(self, x, tol: float = 0.0) -> np.ndarray:
        x = np.atleast_2d(x)
        return np.all(x @ self.A.T <= self.b() + tol, axis=1)


def roa_polyhedra(net: Network, fi: FiSet) -> tuple[RoaPolyhedron, RoaPolyhedron]:
    """(polyhedron for support {i-1, i}, polyhedron for support {i, i+1})."""
    w = separating_normal(net, fi.i)
    z = np.zeros(1)

    def make(sign, m, side):
        return RoaPolyhedron(m, side, fi, w,
                             np.vstack([fi.A, sign * w]),
                             np.concatenate([fi.b0, z]), np.concatenate([fi.b_alpha, z]),
                             np.concatenate([fi.b_beta, z]), fi.labels + ["phi>=0" if sign < 0 else "phi<=0"])

    # left attractor keeps phi >= 0, written -w'x <= 0
    left = make(-1.0, fi.i - 1, Side.R)
    right = make(1.0, fi.i, Side.L)
    return left, right


def side_polyhedra(net: Network, m: int, alpha_fi: Optional[float] = None,
                   beta_fi: Optional[float] = None) -> dict:
    """Polyhedra certifying the attractor with support {m, m+1}, keyed by side.

    Side L comes from the invariant set centered at m (the attractor is its
    right member, phi <= 0); side R from the set centered at m+1 (left member,
    phi >= 0). Boundary attractors have a single side.
    """
    n = net.n
    if not 1 <= m <= n - 1:
        raise IndexRangeError(f"attractor index must lie in [1, {n - 1}], got {m}")
    region = fi_parameters(net.params)
    if not region.feasible:
        return {}
    if alpha_fi is None or beta_fi is None:
        alpha_fi, beta_fi = region.default_levels()
    out = {}
    if 2 <= m <= n - 1:
        _, right = roa_polyhedra(net, build_fi_set(net, m, alpha_fi, beta_fi))
        out[Side.L] = right
    if 2 <= m + 1 <= n - 1:
        left, _ = roa_polyhedra(net, build_fi_set(net, m + 1, alpha_fi, beta_fi))
        out[Side.R] = left
    return out


@dataclass
class SideRadius:
    r: float
    alpha: float
    beta: float
    outside: bool
    binding: str


@dataclass
class LpCertificate:
    m: int
    sides: dict
    r: float
    combine: str = "min"
    flags: list = field(default_factory=list)

    @property
    def r_L(self) -> Optional[float]:
        s = self.sides.get(Side.L)
        return None if s is None else s.r

    @property
    def r_R(self) -> Optional[float]:
        s = self.sides.get(Side.R)
        return None if s is None else s.r

    def to_json(self) -> dict:
        return {
            "method": "lp", "attractor_index": self.m, "r": self.r, "combine": self.combine,
            "sides": {k.value: {"r": v.r, "alpha": v.alpha, "beta": v.beta, "outside": v.outside,
                                "binding": v.binding} for k, v in self.sides.items()},
            "flags": self.flags,
        }


def _ratios(poly: RoaPolyhedron, x_c, rownorm, alpha, beta):
    slack = poly.b(alpha, beta) - poly.A @ x_c
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rownorm > 0, slack / rownorm, np.where(slack >= 0, np.inf, -np.inf))
    return ratio


def side_radius(poly: RoaPolyhedron, W_E, P, joint: bool = True,
                region: Optional[FiRegion] = None) -> SideRadius:
    """Largest r with x_c + W_E' eta inside the polyhedron for every |eta| <= r."""
    x_c = np.asarray(P, dtype=float) @ W_E
    rownorm = np.linalg.norm(poly.A @ W_E.T, axis=1)
    if not np.any(rownorm > 0):
        raise DegenerateEncoderError("encoder does not move any constraint of the polyhedron")
    if not joint:
        ratio = _ratios(poly, x_c, rownorm, poly.fi.alpha_fi, poly.fi.beta_fi)
        k = int(np.argmin(ratio))
        r = float(ratio[k])
        return SideRadius(max(r, 0.0), poly.fi.alpha_fi, poly.fi.beta_fi, r < 0, poly.labels[k])
    region = region or fi_parameters(poly.fi.params)
    # variables (r, alpha, beta); maximize r
    A_rows = np.column_stack([rownorm, -poly.b_alpha, -poly.b_beta])
    b_rows = poly.b0 - poly.A @ x_c
    A_lv = np.column_stack([np.zeros(region.G.shape[0]), region.G])
    prob = LpProblem(np.array([-1.0, 0.0, 0.0]), np.vstack([A_rows, A_lv]),
                     np.concatenate([b_rows, region.h]),
                     lb=np.array([-np.inf, 0.0, 0.0]))
    res = lp_solve(prob)
    if not res.ok:
        raise RuntimeError(f"radius LP ended with status {res.status.value}")
    r, a, bt = (float(v) for v in res.x)
    ratio = _ratios(poly, x_c, rownorm, a, bt)
    k = int(np.argmin(ratio))
    return SideRadius(max(r, 0.0), a, bt, r < 0, poly.labels[k])


def certify_lp(net: Network, W_E, P, m: int, joint: bool = True, combine: str = "min",
               alpha_fi: Optional[float] = None, beta_fi: Optional[float] = None) -> LpCertificate:
    """LP radius for the pattern P bound to the attractor with support {m, m+1}."""
    if combine not in ("min", "max"):
        raise ValueError("combine must be 'min' or 'max'")
    W_E = np.asarray(W_E, dtype=float)
    if not np.any(W_E):
        raise DegenerateEncoderError("encoder is identically zero")
    region = fi_parameters(net.params)
    if not region.feasible:
        return LpCertificate(m, {}, 0.0, combine, ["invariant set levels infeasible"])
    polys = side_polyhedra(net, m, alpha_fi, beta_fi)
    sides, flags = {}, []
    for side, poly in polys.items():
        sr = side_radius(poly, W_E, P, joint=joint, region=region)
        if sr.outside:
            flags.append(f"target outside polyhedron {side.value}")
        sides[side] = sr
    if len(sides) == 1:
        flags.append(f"single-sided: only polyhedron {next(iter(sides)).value} exists at the chain end")
    radii = [s.r for s in sides.values()]
    r = min(radii) if combine == "min" else max(radii)
    return LpCertificate(m, sides, float(r), combine, flags)


def pattern_sides(net: Network, support: SupportSet) -> int:
    """Attractor index m of a double support {m, m+1}."""
    if len(support) != 2 or support[1] != support[0] + 1:
        raise IndexRangeError(f"{support} is not a double support")
    return support[0]
