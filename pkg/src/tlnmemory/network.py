"""Chain-structured threshold-linear networks and their equilibria.

All chain indices in the public interface are 1-based; arrays are indexed
from 0 internally.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .errors import DegenerateNetworkError, DimensionError, IndexRangeError, ParameterError

# |Re(lambda)| below this counts as zero when classifying equilibria.
HYPERBOLIC_TOL = 1e-9


@dataclass(frozen=True)
class CstlnParams:
    n: int
    epsilon: float
    delta: float
    c: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ParameterError(f"n must be an integer >= 2, got {self.n}")
        if not 0.0 < self.epsilon < 1.0:
            raise ParameterError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not self.delta > 0.0:
            raise ParameterError(f"delta must be > 0, got {self.delta}")
        if not self.c > 0.0:
            raise ParameterError(f"c must be > 0, got {self.c}")

    @property
    def attractor_level(self) -> float:
        """Active coordinate value c / (2 - epsilon) of every double-support attractor."""
        return self.c / (2.0 - self.epsilon)

    def to_dict(self) -> dict:
        return {"n": int(self.n), "epsilon": float(self.epsilon),
                "delta": float(self.delta), "c": float(self.c)}


class SupportSet(tuple):
    """Sorted tuple of distinct 1-based coordinate indices."""

    def __new__(cls, indices: Iterable[int], n: Optional[int] = None):
        idx = tuple(sorted(int(i) for i in indices))
        if len(set(idx)) != len(idx):
            raise IndexRangeError(f"duplicate indices in support {idx}")
        if idx and idx[0] < 1:
            raise IndexRangeError(f"support indices are 1-based, got {idx}")
        if n is not None and idx and idx[-1] > n:
            raise IndexRangeError(f"support {idx} exceeds dimension {n}")
        return super().__new__(cls, idx)

    @classmethod
    def from_state(cls, x: np.ndarray, tol: float = 0.0) -> "SupportSet":
        return cls(np.flatnonzero(np.asarray(x) > tol) + 1)

    @property
    def zero_based(self) -> np.ndarray:
        return np.asarray(self, dtype=int) - 1

    def mask(self, n: int) -> np.ndarray:
        m = np.zeros(n, dtype=bool)
        m[self.zero_based] = True
        return m

    def complement(self, n: int) -> "SupportSet":
        return SupportSet(k for k in range(1, n + 1) if k not in self)

    def distance(self, j: int) -> int:
        """Chain distance from index j to the nearest member."""
        return min(abs(j - s) for s in self)

    def __repr__(self):
        return "{" + ",".join(str(i) for i in self) + "}"


class Kind(enum.Enum):
    ATTRACTOR = "attractor"
    SADDLE = "saddle"
    OTHER = "other"


@dataclass(frozen=True)
class Equilibrium:
    x: np.ndarray
    support: SupportSet
    kind: Kind
    eigenvalues: np.ndarray
    # min over support of y_i and min over complement of -y_k; both > 0 inside the cell
    on_margin: float = float("nan")
    off_margin: float = float("nan")

    @property
    def margin(self) -> float:
        return min(self.on_margin, self.off_margin)


@dataclass(frozen=True)
class Network:
    params: CstlnParams
    W: np.ndarray = field(repr=False)
    theta: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.params.n


def build_network(params: CstlnParams) -> Network:
    n = params.n
    k = np.arange(n)
    gap = np.abs(k[:, None] - k[None, :])
    W = np.where(gap == 1, -1.0 + params.epsilon, -1.0 - params.delta)
    W[gap == 0] = 0.0
    theta = np.full(n, float(params.c))
    W.setflags(write=False)
    theta.setflags(write=False)
    return Network(params, W, theta)


def _check_state(net: Network, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != net.n:
        raise DimensionError(f"state has trailing dimension {x.shape[-1]}, network has n={net.n}")
    return x


def drive(net: Network, x) -> np.ndarray:
    """Preactivation y = W x + theta (broadcasts over leading batch axes)."""
    x = _check_state(net, x)
    return x @ net.W + net.theta  # W is symmetric


def vector_field(net: Network, x) -> np.ndarray:
    x = _check_state(net, x)
    return -x + np.maximum(x @ net.W + net.theta, 0.0)


def cell_jacobian(net: Network, support) -> tuple[np.ndarray, Kind, np.ndarray]:
    """Jacobian -I + D_sigma W of the affine dynamics in cell C_sigma.

    Returns the Jacobian in original coordinates, its classification and the
    full eigenvalue list (sorted by real part).
    """
    n = net.n
    sigma = SupportSet(support, n)
    D = np.diag(sigma.mask(n).astype(float))
    J = -np.eye(n) + D @ net.W
    eig = np.linalg.eigvals(J)
    eig = eig[np.argsort(eig.real)]
    return J, classify_spectrum(eig), eig


def classify_spectrum(eig: np.ndarray) -> Kind:
    re = np.real(eig)
    if np.any(np.abs(re) < HYPERBOLIC_TOL):
        return Kind.OTHER
    n_unstable = int(np.sum(re > 0))
    if n_unstable == 0:
        return Kind.ATTRACTOR
    if n_unstable == 1:
        return Kind.SADDLE
    return Kind.OTHER


def restricted_solve(net: Network, support) -> np.ndarray:
    """x_sigma = (I - W_ss)^-1 theta_sigma, zero elsewhere."""
    n = net.n
    sigma = SupportSet(support, n)
    if not sigma:
        raise IndexRangeError("support must be nonempty")
    s = sigma.zero_based
    M = np.eye(len(s)) - net.W[np.ix_(s, s)]
    if abs(np.linalg.det(M)) < 1e-12:
        raise DegenerateNetworkError(f"I - W restricted to {sigma} is singular")
    x = np.zeros(n)
    x[s] = np.linalg.solve(M, net.theta[s])
    return x


def equilibrium_in_cell(net: Network, support) -> Optional[Equilibrium]:
    """Equilibrium of cell C_sigma, or None when the strict cell conditions fail."""
    n = net.n
    sigma = SupportSet(support, n)
    x = restricted_solve(net, sigma)
    y = drive(net, x)
    on = sigma.mask(n)
    on_margin = float(np.min(y[on]))
    off_margin = float(np.min(-y[~on])) if np.any(~on) else float("inf")
    if on_margin <= 0.0 or off_margin <= 0.0:
        return None
    _, kind, eig = cell_jacobian(net, sigma)
    return Equilibrium(x, sigma, kind, eig, on_margin, off_margin)


def attractor_closed_form(net: Network, i: int) -> Equilibrium:
    """Attractor with support {i, i+1}: both active coordinates equal c/(2-eps)."""
    n = net.n
    if not 1 <= i <= n - 1:
        raise IndexRangeError(f"attractor index must be in [1, {n - 1}], got {i}")
    x = np.zeros(n)
    x[i - 1] = x[i] = net.params.attractor_level
    sigma = SupportSet((i, i + 1))
    return _closed_form_equilibrium(net, x, sigma)


def saddle_levels(params: CstlnParams) -> tuple[float, float, float]:
    """(outer, center, Delta) coordinates of the triple-support saddle."""
    eps, d, c = params.epsilon, params.delta, params.c
    big_delta = d + 4 * eps - 2 * eps ** 2
    return c * eps / big_delta, c * (d + 2 * eps) / big_delta, big_delta


def saddle_closed_form(net: Network, i: int) -> Equilibrium:
    """Hyperbolic saddle with support {i-1, i, i+1}."""
    n = net.n
    if n < 3:
        raise IndexRangeError("saddles need n >= 3")
    if not 2 <= i <= n - 1:
        raise IndexRangeError(f"saddle index must be in [2, {n - 1}], got {i}")
    outer, center, _ = saddle_levels(net.params)
    x = np.zeros(n)
    x[i - 2] = x[i] = outer
    x[i - 1] = center
    return _closed_form_equilibrium(net, x, SupportSet((i - 1, i, i + 1)))


def _closed_form_equilibrium(net, x, sigma):
    y = drive(net, x)
    on = sigma.mask(net.n)
    _, kind, eig = cell_jacobian(net, sigma)
    off = float(np.min(-y[~on])) if np.any(~on) else float("inf")
    return Equilibrium(x, sigma, kind, eig, float(np.min(y[on])), off)


def on_support_spectrum(net: Network, support) -> np.ndarray:
    """Eigenvalues of -I + W_ss (ascending), the in-cell block acting on the support."""
    s = SupportSet(support, net.n).zero_based
    block = -np.eye(len(s)) + net.W[np.ix_(s, s)]
    return np.linalg.eigvalsh(block)


def all_attractors(net: Network) -> list[Equilibrium]:
    return [attractor_closed_form(net, i) for i in range(1, net.n)]


def all_saddles(net: Network) -> list[Equilibrium]:
    return [saddle_closed_form(net, i) for i in range(2, net.n)]
