"""Batched simulation of gated learning and inference sessions.

A session presents one pattern to the latent network: the trigger watches
the cosine similarity between the decoded state and the presented pattern,
opens the gate G on a mismatch, and the attached controller acts while G is
on. Once the pulse has run its course (timer past H and G below ``g_off``)
the network settles autonomously.

Every row of a batch is an independent session sharing the same pattern
statistics; rows finish individually.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .controller import (LearnControlConfig, LqrConfig, TriggerConfig, TriggerState,
                         build_inhibition, learning_input, lqr_aux_converge, noise_kernel,
                         noise_step, trigger_step)
from .dynamics import IntegratorConfig, Trajectory, rk4_step, settle_batch
from .network import Network, SupportSet


@dataclass(frozen=True)
class SessionConfig:
    dt: float = 1e-2
    t_max: float = 300.0
    # gate level below which a finished pulse counts as closed
    g_off: float = 1e-3
    # gate level a pulse must exceed to count as a trigger event
    g_on: float = 0.5
    settle_tol: float = 1e-10
    settle_t_max: float = 300.0
    support_tol: float = 1e-6
    retry_max: int = 5
    record_every: int = 10
    trigger: TriggerConfig = field(default_factory=TriggerConfig)
    learn: LearnControlConfig = field(default_factory=LearnControlConfig)
    lqr: LqrConfig = field(default_factory=LqrConfig)

    def __post_init__(self):
        if not self.dt > 0 or not self.t_max > 0:
            raise ValueError("dt and t_max must be positive")
        if self.retry_max < 0:
            raise ValueError("retry_max must be >= 0")


@dataclass
class SessionOutcome:
    final_states: np.ndarray
    supports: list
    converged: np.ndarray
    triggered: np.ndarray
    g_max: np.ndarray
    gate_closed_at: np.ndarray
    trajectory: Optional[Trajectory] = None


class LatentSimilarity:
    """cos(W_D' x, P) evaluated in latent space.

    With v = W_D P and M = W_D W_D', the decoded inner product is x'v and the
    decoded squared norm is x'Mx. A zero decoded vector has similarity 0.
    """

    def __init__(self, W_D: np.ndarray, P: np.ndarray):
        P = np.asarray(P, dtype=float)
        self.v = W_D @ P
        self.M = W_D @ W_D.T
        self.p_norm = float(np.linalg.norm(P))
        if self.p_norm == 0.0:
            raise ValueError("presented pattern has zero norm")

    def __call__(self, X: np.ndarray) -> np.ndarray:
        dot = X @ self.v
        sq = np.einsum("bi,ij,bj->b", X, self.M, X)
        den = self.p_norm * np.sqrt(np.maximum(sq, 0.0))
        return np.divide(dot, den, out=np.zeros_like(dot), where=den > 1e-300)


def _run_gated(net: Network, X0: np.ndarray, sim: LatentSimilarity, cfg: SessionConfig,
               rng: np.random.Generator, controller: Callable, noisy: bool, record: bool):
    """Core loop: trigger + gated control, then autonomous settling.

    ``controller.prepare(idx)`` is called whenever the active row set
    changes; ``controller(Z, G, a)`` returns (u_in, u_out) for those rows.
    """
    X = np.array(X0, dtype=float)
    B, n = X.shape
    W, theta, dt = net.W, net.theta, cfg.dt
    tc = cfg.trigger
    trig = TriggerState.rest(B)
    a = rng.standard_normal(B) if noisy else np.zeros(B)
    g_max = np.zeros(B)
    closed_at = np.full(B, np.nan)
    active = np.ones(B, dtype=bool)
    probe_t = 5.0 * tc.tau_q
    times, states, aux = [], [], {k: [] for k in ("G", "gamma", "q", "T", "w")}

    def push(t):
        times.append(t)
        states.append(X[0].copy())
        for k, v in trig.as_record().items():
            aux[k].append(float(np.atleast_1d(v)[0]))

    if record:
        push(0.0)
    steps = int(round(cfg.t_max / dt))
    idx = np.arange(B)
    controller.prepare(idx)
    for k in range(1, steps + 1):
        if idx.size == 0:
            break
        s = sim(X)
        trig = trigger_step(trig, s, tc, dt)
        if noisy:
            a = noise_step(a, cfg.learn.tau_ou, dt, rng)
        G = trig.G
        g_max = np.maximum(g_max, G)
        Xa, Ga, aa = X[idx], G[idx], a[idx]

        def f(_, Z):
            u_in, u_out = controller(Z, Ga, aa)
            return -Z + np.maximum(Z @ W + theta + u_in, 0.0) + u_out

        X[idx] = rk4_step(f, 0.0, Xa, dt)
        t = k * dt
        pulse_done = (np.asarray(trig.T) > tc.H) & (G < cfg.g_off)
        never = (t >= probe_t) & (np.asarray(trig.q) < 1e-3) & (g_max < cfg.g_on)
        finish = active & (pulse_done | never)
        closed_at[finish] = t
        if np.any(finish):
            active &= ~finish
            idx = np.flatnonzero(active)
            controller.prepare(idx)
        if record and (k % cfg.record_every == 0):
            push(t)

    icfg = IntegratorConfig(dt=min(dt, 1e-2), t_max=cfg.settle_t_max, settle_tol=cfg.settle_tol)
    X, conv, _ = settle_batch(net, X, icfg)
    supports = [SupportSet.from_state(x, cfg.support_tol) for x in X]
    traj = None
    if record:
        traj = Trajectory(np.array(times), np.array(states), {k: np.array(v) for k, v in aux.items()})
    return SessionOutcome(X, supports, conv, g_max >= cfg.g_on, g_max, closed_at, traj)


def simulate_learning(net: Network, x0, current_support, W_D, P, cfg: SessionConfig,
                      rng: np.random.Generator, record: bool = False) -> SessionOutcome:
    """Learning sessions from x0 (n,) or (B, n) with inhibition fixed on current_support."""
    X0 = np.atleast_2d(np.asarray(x0, dtype=float))
    lc = cfg.learn
    W_inh = build_inhibition(current_support, lc.c_inh, net.n)
    kern = noise_kernel(current_support, net.n, lc.kernel_decay)
    sim = LatentSimilarity(W_D, P)

    class Controller:
        def prepare(self, idx):
            pass

        def __call__(self, Z, G, a):
            u = learning_input(Z, W_inh, a, kern, lc.kappa)
            return lc.r_gain * G[:, None] * u, 0.0

    return _run_gated(net, X0, sim, cfg, rng, Controller(), noisy=True, record=record)


class GainCache:
    """LQR gains from the auxiliary flow, cached by the activation pattern of x_tar.

    The fixed point of the D flow depends on x_tar only through which
    preactivations exceed h_on, so targets sharing that mask share K.
    """

    def __init__(self, net: Network, lqr: LqrConfig, method: str = "flow"):
        self.net, self.lqr, self.method = net, lqr, method
        self._store: dict = {}

    def key(self, x_tar) -> tuple:
        h = np.asarray(x_tar) @ self.net.W + self.net.theta
        return tuple(bool(v) for v in (h > self.lqr.h_on))

    def gain(self, x_tar) -> np.ndarray:
        k = self.key(x_tar)
        if k not in self._store:
            if self.method == "flow":
                st, _ = lqr_aux_converge(self.net, x_tar, self.lqr)
                self._store[k] = st.K
            elif self.method == "care":
                from .controller import linearize
                from .numerics import care_solve
                A, _ = linearize(self.net, x_tar)
                n = self.net.n
                B = self.lqr.r_gain * self.lqr.design_gate * np.eye(n)
                _, K = care_solve(A, B, self.lqr.q_weight * np.eye(n), self.lqr.r_weight * np.eye(n))
                self._store[k] = K
            else:
                raise ValueError(f"unknown gain method {self.method!r}")
        return self._store[k]

    def gains(self, X_tar) -> np.ndarray:
        return np.stack([self.gain(x) for x in np.atleast_2d(X_tar)])


def simulate_inference(net: Network, x0, x_tar, W_D, P_presented, cfg: SessionConfig,
                       rng: np.random.Generator, gains: Optional[np.ndarray] = None,
                       cache: Optional[GainCache] = None, record: bool = False) -> SessionOutcome:
    """Inference sessions: x0 and x_tar are (n,) or (B, n); P_presented is (d,) or (B, d).

    The feedback -r G K (x - x_tar) enters outside the rectifier.
    """
    X_tar = np.atleast_2d(np.asarray(x_tar, dtype=float))
    B = X_tar.shape[0]
    X0 = np.broadcast_to(np.atleast_2d(np.asarray(x0, dtype=float)), (B, net.n)).copy()
    if gains is None:
        cache = cache or GainCache(net, cfg.lqr)
        gains = cache.gains(X_tar)
    K = np.broadcast_to(gains, (B, net.n, net.n))
    shared = bool(np.all(K == K[0]))
    r = cfg.lqr.r_gain
    Pp = np.atleast_2d(np.asarray(P_presented, dtype=float))
    if Pp.shape[0] == 1:
        sim = LatentSimilarity(W_D, Pp[0])
    else:
        sim = _RowSimilarity(W_D, Pp)

    class Controller:
        def prepare(self, idx):
            self.xt = X_tar[idx]
            self.K = K[0].T if shared else K[idx]

        def __call__(self, Z, G, _a):
            e = Z - self.xt
            u = -(e @ self.K) if shared else -np.einsum("bij,bj->bi", self.K, e)
            return 0.0, (r * G)[:, None] * u

    return _run_gated(net, X0, sim, cfg, rng, Controller(), noisy=False, record=record)


class _RowSimilarity:
    """Per-row presented patterns (one noisy input per batch row)."""

    def __init__(self, W_D, Ps):
        self.V = Ps @ W_D.T                     # (B, n): row b is W_D P_b
        self.M = W_D @ W_D.T
        self.p_norm = np.linalg.norm(Ps, axis=1)
        if np.any(self.p_norm == 0):
            raise ValueError("presented pattern has zero norm")

    def __call__(self, X):
        dot = np.einsum("bi,bi->b", X, self.V)
        sq = np.einsum("bi,ij,bj->b", X, self.M, X)
        den = self.p_norm * np.sqrt(np.maximum(sq, 0.0))
        return np.divide(dot, den, out=np.zeros_like(dot), where=den > 1e-300)
