"""Mismatch trigger, learning controller (local inhibition + correlated OU
noise) and inference controller (linearization + LQR gain computed by an
auxiliary gradient-flow system).

Scalars in the trigger and OU routines may be numpy arrays; every update is
elementwise so a batch of independent sessions steps together.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DivergenceError, IndexRangeError, ParameterError
from .network import Network, SupportSet


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=float)))


# --------------------------------------------------------------------------
# trigger / latch / timer / pulse

@dataclass(frozen=True)
class TriggerConfig:
    m_gain: float = 400.0
    s_th: float = 0.9
    tau_q: float = 2.0
    tau_r: float = 0.25
    tau_d: float = 5.0
    beta_gate: float = 50.0
    H: float = 15.0

    def __post_init__(self):
        for name in ("m_gain", "tau_q", "tau_r", "tau_d", "beta_gate", "H"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive")


@dataclass
class TriggerState:
    gamma: np.ndarray | float = 0.0
    q: np.ndarray | float = 0.0
    T: np.ndarray | float = 0.0
    w_gate: np.ndarray | float = 0.0
    G: np.ndarray | float = 0.0

    @classmethod
    def rest(cls, batch: int | None = None) -> "TriggerState":
        if batch is None:
            return cls()
        z = np.zeros(batch)
        return cls(z.copy(), z.copy(), z.copy(), z.copy(), z.copy())

    def as_record(self) -> dict:
        return {"G": self.G, "gamma": self.gamma, "q": self.q, "T": self.T, "w": self.w_gate}


def trigger_step(state: TriggerState, s, cfg: TriggerConfig, dt: float) -> TriggerState:
    """One explicit Euler step of the trigger/latch/timer/pulse system.

    gamma is evaluated from the current similarity s; the pulse G is clipped
    to [0, 1] after the update.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    gamma = sigmoid(cfg.m_gain * (cfg.s_th - np.asarray(s, dtype=float)))
    q, T, G = state.q, state.T, state.G
    w_gate = sigmoid(cfg.beta_gate * (np.asarray(T) - cfg.H))
    dq = gamma * (1.0 - q) / cfg.tau_q
    dG = (1.0 - G) * gamma * (1.0 - q) / cfg.tau_r - G * w_gate / cfg.tau_d
    q_new = np.clip(q + dt * dq, 0.0, 1.0)
    T_new = T + dt * q
    G_new = np.clip(G + dt * dG, 0.0, 1.0)
    w_new = sigmoid(cfg.beta_gate * (T_new - cfg.H))
    return TriggerState(gamma, q_new, T_new, w_new, G_new)


# --------------------------------------------------------------------------
# learning controller

@dataclass(frozen=True)
class LearnControlConfig:
    c_inh: float = 3.0
    r_gain: float = 1.0
    kappa: float = 3.0
    # fast noise: the rectifier passes positive excursions only, which gives a
    # net forward drive on the coordinate ahead of the support
    tau_ou: float = 0.05
    kernel_decay: float = 1.0

    def __post_init__(self):
        for name in ("c_inh", "r_gain", "kappa", "tau_ou", "kernel_decay"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive")


def build_inhibition(current_support, c_inh: float, n: int) -> np.ndarray:
    """Local inhibition: -c_inh between the two active coordinates, zero elsewhere."""
    sigma = SupportSet(current_support, n)
    if len(sigma) != 2:
        raise IndexRangeError(f"inhibition needs a double support, got {sigma}")
    W_inh = np.zeros((n, n))
    i, j = sigma.zero_based
    W_inh[i, j] = W_inh[j, i] = -float(c_inh)
    return W_inh


def noise_kernel(current_support, n: int, decay: float = 1.0) -> np.ndarray:
    """Spatial profile exp(-decay * dist(j, support)), zeroed below the support.

    The forward bias steers transitions toward higher chain indices.
    """
    sigma = SupportSet(current_support, n)
    j = np.arange(1, n + 1)
    dist = np.array([sigma.distance(k) for k in j], dtype=float)
    k = np.exp(-decay * dist)
    k[j < min(sigma)] = 0.0
    return k


def noise_step(a, tau: float, dt: float, rng: np.random.Generator):
    """Euler-Maruyama step of a' = -a/tau + sqrt(2/tau) * white noise (unit stationary variance)."""
    if not tau > 0:
        raise ParameterError("tau must be positive")
    a = np.asarray(a, dtype=float)
    xi = rng.standard_normal(a.shape)
    return a - (a / tau) * dt + np.sqrt(2.0 / tau) * np.sqrt(dt) * xi


def learning_input(x, W_inh, a, kernel, kappa: float):
    """u_learn = W_inh x + kappa * tanh(a) * k; enters inside the rectifier scaled by r G."""
    x = np.asarray(x, dtype=float)
    return x @ W_inh.T + kappa * np.tanh(np.asarray(a))[..., None] * kernel


# --------------------------------------------------------------------------
# inference controller

def linearize(net: Network, x_tar) -> tuple[np.ndarray, np.ndarray]:
    """(A, D) with D_ii = 1 iff (W x_tar + theta)_i > 0 and A = -I + D W."""
    h = np.asarray(x_tar, dtype=float) @ net.W + net.theta
    D = np.diag((h > 0).astype(float))
    return -np.eye(net.n) + D @ net.W, D


@dataclass(frozen=True)
class LqrConfig:
    h_on: float = 0.05
    alpha_d: float = 50.0
    beta_d: float = 50.0
    tau_d: float = 0.01
    tau_a: float = 0.01
    tau_p: float = 0.01
    tau_k: float = 0.05
    q_weight: float = 1.0
    r_weight: float = 1.0
    r_gain: float = 10.0
    # K is designed against B = r * design_gate * I
    design_gate: float = 1.0

    def __post_init__(self):
        for name in ("alpha_d", "beta_d", "tau_d", "tau_a", "tau_p", "tau_k", "q_weight", "r_weight", "r_gain"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive")


@dataclass
class LqrAuxState:
    D: np.ndarray
    A: np.ndarray
    P_ric: np.ndarray
    K: np.ndarray
    config: LqrConfig = field(default_factory=LqrConfig)

    @classmethod
    def initial(cls, n: int, config: LqrConfig | None = None, batch: int | None = None) -> "LqrAuxState":
        """D = 0, A = -I, and a stabilizing start P = I / r, K = R^-1 B' P."""
        cfg = config or LqrConfig()
        r = cfg.r_gain * cfg.design_gate
        shape = (n, n) if batch is None else (batch, n, n)
        I = np.broadcast_to(np.eye(n), shape).copy()
        P = I / r
        K = (r / cfg.r_weight) * P
        return cls(np.zeros(shape), -I.copy(), P, K, cfg)


def _aux_rhs(state: LqrAuxState, W, h, G):
    cfg = state.config
    n = W.shape[0]
    I = np.eye(n)
    g_on = np.maximum(h - cfg.h_on, 0.0)
    g_off = np.maximum(0.0 - h, 0.0)
    D, A, P, K = state.D, state.A, state.P_ric, state.K
    Q = cfg.q_weight * I
    R_w = cfg.r_weight
    Bs = cfg.r_gain * G  # B = r G I
    dD = (cfg.alpha_d * (I - D) * g_on[..., None, :] - cfg.beta_d * D * g_off[..., None, :]) / cfg.tau_d
    dA = (-A + D @ W - I) / cfg.tau_a
    Acl = A - Bs[..., None, None] * K if np.ndim(Bs) else A - Bs * K
    KtK = np.swapaxes(K, -1, -2) @ K
    dP = (np.swapaxes(Acl, -1, -2) @ P + P @ Acl + Q + R_w * KtK) / cfg.tau_p
    BtP = Bs[..., None, None] * P if np.ndim(Bs) else Bs * P
    dK = -(R_w * K - BtP) / cfg.tau_k
    return dD, dA, dP, dK


def lqr_aux_step(state: LqrAuxState, net: Network, x_tar, G, dt: float,
                 scheme: str = "euler") -> LqrAuxState:
    """One step of the D / A / P / K flows.

    G is the gate value entering B = r G I; pass the design gate (1.0) to
    compute the gain the inference controller applies. ``scheme="euler"`` is
    a plain explicit Euler step. ``scheme="exp"`` advances the two linear
    sub-flows (D, then A with D frozen) exactly over the step and uses Euler
    for P and K; it removes the stiffness of the fast D and A flows.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    cfg = state.config
    h = np.asarray(x_tar, dtype=float) @ net.W + net.theta
    G = np.asarray(G, dtype=float)
    dD, dA, dP, dK = _aux_rhs(state, net.W, h, G)
    I = np.eye(net.n)
    if scheme == "euler":
        D = np.clip(state.D + dt * dD, 0.0, 1.0) * I
        A = state.A + dt * dA
    elif scheme == "exp":
        a = cfg.alpha_d * np.maximum(h - cfg.h_on, 0.0) / cfg.tau_d
        b = cfg.beta_d * np.maximum(-h, 0.0) / cfg.tau_d
        rate = a + b
        d_inf = np.divide(a, rate, out=np.zeros_like(a), where=rate > 0)
        d_old = np.diagonal(state.D, axis1=-2, axis2=-1)
        d_new = d_inf + (d_old - d_inf) * np.exp(-rate * dt)
        D = d_new[..., :, None] * I
        A_inf = D @ net.W - I
        A = A_inf + (state.A - A_inf) * np.exp(-dt / cfg.tau_a)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    P = state.P_ric + dt * dP
    P = 0.5 * (P + np.swapaxes(P, -1, -2))
    K = state.K + dt * dK
    if not (np.all(np.isfinite(P)) and np.all(np.isfinite(K))):
        raise DivergenceError("LQR auxiliary flow diverged; reduce dt or enlarge the time constants")
    return replace(state, D=D, A=A, P_ric=P, K=K)


def aux_stable_dt(state: LqrAuxState, net: Network, x_tar, G=1.0, safety: float = 0.25,
                  scheme: str = "euler") -> float:
    """Step size that keeps the explicit parts of the auxiliary flows stable."""
    cfg = state.config
    Bs = cfg.r_gain * float(np.max(G))
    acl = np.max(np.linalg.norm(state.A - Bs * state.K, 2, axis=(-2, -1)))
    rates = [2.0 * acl / cfg.tau_p, 1.0 / cfg.tau_k]
    if scheme == "euler":
        h = np.asarray(x_tar, dtype=float) @ net.W + net.theta
        rates.append(np.max(cfg.alpha_d * np.maximum(h - cfg.h_on, 0)
                            + cfg.beta_d * np.maximum(-h, 0)) / cfg.tau_d)
        rates.append(1.0 / cfg.tau_a)
    return safety / max(rates)


def lqr_aux_converge(net: Network, x_tar, config: LqrConfig | None = None, t_max: float = 10.0,
                     tol: float = 1e-9, state: LqrAuxState | None = None, scheme: str = "exp",
                     check_every: int = 50):
    """Integrate the auxiliary flows (gate fixed at the design value) until stationary.

    Returns (state, elapsed_time). Works on a single target (n,) or a batch
    (B, n). Stationarity is measured by the relative size of the K and P
    right-hand sides.
    """
    cfg = config or LqrConfig()
    x_tar = np.asarray(x_tar, dtype=float)
    batch = None if x_tar.ndim == 1 else x_tar.shape[0]
    st = state or LqrAuxState.initial(net.n, cfg, batch)
    G = cfg.design_gate
    h = x_tar @ net.W + net.theta
    t, k = 0.0, 0
    dt = aux_stable_dt(st, net, x_tar, G, scheme=scheme)
    while t < t_max:
        st = lqr_aux_step(st, net, x_tar, G, dt, scheme=scheme)
        t += dt
        k += 1
        if k % check_every == 0:
            dt = aux_stable_dt(st, net, x_tar, G, scheme=scheme)
            _, _, dP, dK = _aux_rhs(st, net.W, h, np.asarray(G, dtype=float))
            scale = max(1.0, float(np.max(np.abs(st.K))))
            if max(np.max(np.abs(dK)) * cfg.tau_k, np.max(np.abs(dP)) * cfg.tau_p) < tol * scale:
                break
    return st, t


def feedback_input(x, x_tar, K):
    """u_fb = -K (x - x_tar); enters outside the rectifier scaled by r G."""
    e = np.asarray(x, dtype=float) - np.asarray(x_tar, dtype=float)
    return -np.einsum("...ij,...j->...i", K, e)
