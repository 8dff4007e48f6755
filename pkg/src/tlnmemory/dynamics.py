"""Fixed-step integration of the (controlled) TLN, settling detection and
diagnostics along trajectories.

States may carry leading batch axes: every routine here works on arrays of
shape (n,) or (B, n).
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DivergenceError
from .network import Network, SupportSet, vector_field

log = logging.getLogger(__name__)

AUX_FIELDS = ("G", "gamma", "q", "T", "w")


@dataclass
class IntegratorConfig:
    dt: float = 1e-3
    t_max: float = 60.0
    settle_tol: float = 1e-8
    settle_window: int = 100
    rng_seed: int = 0
    record_every: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if not self.t_max > 0:
            raise ValueError(f"t_max must be > 0, got {self.t_max}")
        if not self.settle_tol > 0:
            raise ValueError(f"settle_tol must be > 0, got {self.settle_tol}")

    @property
    def support_threshold(self) -> float:
        return 10.0 * self.settle_tol


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    aux: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise ValueError("times and states differ in length")
        for k, v in self.aux.items():
            if len(v) != len(self.times):
                raise ValueError(f"aux channel {k!r} has inconsistent length")

    @property
    def n(self) -> int:
        return self.states.shape[-1]

    def to_csv(self, path) -> None:
        n = self.n
        header = ["t"] + [f"x{i}" for i in range(1, n + 1)] + list(AUX_FIELDS)
        cols = [self.aux.get(k, np.full(len(self.times), np.nan)) for k in AUX_FIELDS]
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(header)
            for j, t in enumerate(self.times):
                wr.writerow([repr(float(t))] + [repr(float(v)) for v in self.states[j]]
                            + [repr(float(c[j])) for c in cols])

    def to_json(self) -> dict:
        return {
            "t": self.times.tolist(),
            "x": self.states.tolist(),
            "aux": {k: np.asarray(v).tolist() for k, v in self.aux.items()},
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Trajectory":
        return cls(np.asarray(doc["t"]), np.asarray(doc["x"]),
                   {k: np.asarray(v) for k, v in doc.get("aux", {}).items()})

    @classmethod
    def concatenate(cls, parts: list["Trajectory"]) -> "Trajectory":
        keys = set().union(*(p.aux for p in parts)) if parts else set()
        aux = {}
        for k in keys:
            aux[k] = np.concatenate([p.aux.get(k, np.full(len(p.times), np.nan)) for p in parts])
        return cls(np.concatenate([p.times for p in parts]),
                   np.concatenate([p.states for p in parts]), aux)


@dataclass
class SettleResult:
    final_state: np.ndarray
    support: SupportSet
    converged: bool
    elapsed: float
    residual: float


def rk4_step(f: Callable, t: float, x: np.ndarray, dt: float) -> np.ndarray:
    k1 = f(t, x)
    k2 = f(t + 0.5 * dt, x + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, x + 0.5 * dt * k2)
    k4 = f(t + dt, x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


class InputSource:
    """Base class for (possibly stateful) control inputs.

    ``advance`` runs once per step before the RK4 update (Euler or
    Euler-Maruyama for internal states); ``__call__`` returns the pair
    (inside-rectifier input, outside-rectifier input) used in every RK4 stage.
    """

    def advance(self, t: float, x: np.ndarray, dt: float, rng: np.random.Generator) -> None:
        pass

    def __call__(self, t: float, x: np.ndarray):
        return 0.0, 0.0

    def record(self) -> dict:
        return {}


class _FunctionSource(InputSource):
    def __init__(self, fn):
        self.fn = fn

    def __call__(self, t, x):
        return self.fn(t, x)


def integrate(net: Network, x0, input_source=None, cfg: Optional[IntegratorConfig] = None,
              t_span: Optional[float] = None) -> Trajectory:
    """Integrate x' = -x + [W x + theta + u_in]_+ + u_out with fixed-step RK4."""
    cfg = cfg or IntegratorConfig()
    x = np.array(x0, dtype=float)
    if np.any(x < 0):
        log.warning("initial state has negative components; dynamics will pull them to the orthant")
    if input_source is None:
        src = InputSource()
    elif isinstance(input_source, InputSource):
        src = input_source
    else:
        src = _FunctionSource(input_source)
    rng = np.random.default_rng(cfg.rng_seed)
    W, theta = net.W, net.theta

    def field_(t, z):
        u_in, u_out = src(t, z)
        return -z + np.maximum(z @ W + theta + u_in, 0.0) + u_out

    horizon = cfg.t_max if t_span is None else t_span
    steps = int(round(horizon / cfg.dt))
    times, states, aux = [0.0], [x.copy()], {}

    def push_aux():
        for k, v in src.record().items():
            aux.setdefault(k, []).append(v)

    push_aux()
    t = 0.0
    for k in range(1, steps + 1):
        src.advance(t, x, cfg.dt, rng)
        x_new = rk4_step(field_, t, x, cfg.dt)
        if not np.all(np.isfinite(x_new)):
            raise DivergenceError(f"non-finite state at t={t + cfg.dt:.6g}", t, x)
        x = x_new
        t = k * cfg.dt
        if k % cfg.record_every == 0 or k == steps:
            times.append(t)
            states.append(x.copy())
            push_aux()
    return Trajectory(np.array(times), np.array(states),
                      {k: np.array(v) for k, v in aux.items()})


def field_residual(net: Network, x) -> np.ndarray:
    """Sup-norm of the autonomous vector field (per batch row)."""
    return np.max(np.abs(vector_field(net, x)), axis=-1)


def settle(net: Network, x0, cfg: Optional[IntegratorConfig] = None) -> SettleResult | list[SettleResult]:
    """Run the autonomous dynamics until the field stays below settle_tol.

    A batch (B, n) of initial states returns a list of results.
    """
    cfg = cfg or IntegratorConfig()
    x = np.array(x0, dtype=float)
    batch = x.ndim == 2
    X = x if batch else x[None]
    X, conv, elapsed = settle_batch(net, X, cfg)
    res = field_residual(net, X)
    out = [SettleResult(X[b], SupportSet.from_state(X[b], cfg.support_threshold), bool(conv[b]),
                        float(elapsed[b]), float(res[b])) for b in range(X.shape[0])]
    return out if batch else out[0]


def settle_batch(net: Network, X: np.ndarray, cfg: IntegratorConfig):
    """Vectorized settling. Converged rows are frozen once their window completes."""
    X = np.array(X, dtype=float)
    B = X.shape[0]
    W, theta, dt = net.W, net.theta, cfg.dt

    def f(_, z):
        return -z + np.maximum(z @ W + theta, 0.0)

    quiet = np.zeros(B, dtype=int)
    done = np.zeros(B, dtype=bool)
    elapsed = np.full(B, cfg.t_max)
    steps = int(round(cfg.t_max / dt))
    active = np.arange(B)
    for k in range(steps):
        Xa = X[active]
        res = np.max(np.abs(f(0.0, Xa)), axis=1)
        small = res < cfg.settle_tol
        quiet[active] = np.where(small, quiet[active] + 1, 0)
        finished = quiet[active] >= cfg.settle_window
        if np.any(finished):
            idx = active[finished]
            done[idx] = True
            elapsed[idx] = k * dt
            active = active[~finished]
            if active.size == 0:
                break
            Xa = X[active]
        Xn = rk4_step(f, 0.0, Xa, dt)
        if not np.all(np.isfinite(Xn)):
            raise DivergenceError(f"non-finite state while settling at t={k * dt:.6g}", k * dt, Xa)
        X[active] = Xn
    return X, done, elapsed


def energy(net: Network, x) -> np.ndarray | float:
    """V(x) = x'(I - W)x / 2 - theta'x; non-increasing along trajectories in R_FI and the box [0, theta]."""
    x = np.asarray(x, dtype=float)
    quad = np.einsum("...i,...i->...", x, x) - np.einsum("...i,ij,...j->...", x, net.W, x)
    val = 0.5 * quad - x @ net.theta
    return float(val) if np.ndim(val) == 0 else val


@dataclass
class InvarianceReport:
    entered: bool
    entry_index: Optional[int]
    max_violation: float
    empty_region: bool
    note: str = ""


def check_polytope_invariance(A, b, traj: Trajectory, entry_tol: float = 0.0) -> InvarianceReport:
    """Largest violation of A x <= b after the trajectory first enters the polytope.

    Rows of A are normalized so violations are Euclidean distances to faces.
    """
    from .numerics import LpProblem, LpStatus, lp_solve

    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    norms = np.linalg.norm(A, axis=1)
    norms[norms == 0] = 1.0
    A, b = A / norms[:, None], b / norms
    n = A.shape[1]
    probe = lp_solve(LpProblem(np.zeros(n), A, b, lb=np.full(n, -np.inf)))
    if probe.status is LpStatus.INFEASIBLE:
        return InvarianceReport(False, None, np.nan, True, "polytope is empty")
    viol = np.max(traj.states @ A.T - b, axis=1)
    inside = np.flatnonzero(viol <= entry_tol)
    if inside.size == 0:
        return InvarianceReport(False, None, np.nan, False, "never entered")
    first = int(inside[0])
    return InvarianceReport(True, first, float(max(0.0, np.max(viol[first:]))), False)
