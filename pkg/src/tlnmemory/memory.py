"""Online auto-associative memory on a CSTLN latent space.

Pattern m is bound to the attractor with support {m, m+1}. The encoder
W_E (d x n) maps a pattern to a latent target x_tar = W_E' P and the decoder
W_D (n x d) maps a latent state back to P_hat = W_D' x. Both are learned one
pattern at a time by minimum-norm updates that leave every earlier
association intact.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (CapacityError, DegenerateEncoderError, DimensionError, ParameterError,
                     TransitionError)
from .network import CstlnParams, Network, SupportSet, attractor_closed_form, build_network
from .session import GainCache, SessionConfig, SessionOutcome, simulate_inference, simulate_learning

log = logging.getLogger(__name__)

# projection residual below which a new pattern counts as lying in the span
# of the stored ones
SPAN_TOL = 1e-10


@dataclass(frozen=True)
class Pattern:
    values: np.ndarray
    id: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(v)):
            raise ParameterError(f"pattern {self.id!r} has non-finite entries")
        if not np.linalg.norm(v) > 0:
            raise ParameterError(f"pattern {self.id!r} has zero norm")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def unit(cls, values, id: str = "") -> "Pattern":
        v = np.asarray(values, dtype=float).ravel()
        n = np.linalg.norm(v)
        if not (np.isfinite(n) and n > 0):
            raise ParameterError(f"pattern {id!r} has zero or non-finite norm")
        return cls(v / n, id)

    @property
    def d(self) -> int:
        return self.values.size


@dataclass
class RegistryEntry:
    pattern_id: str
    support: SupportSet
    x_star: np.ndarray
    pattern: np.ndarray


@dataclass
class InferenceResult:
    reconstructed: np.ndarray
    matched_support: SupportSet
    similarity: float
    target_in_certified_region: Optional[bool] = None
    converged: bool = True
    triggered: bool = True
    final_state: Optional[np.ndarray] = None
    x_tar: Optional[np.ndarray] = None
    matched_pattern: Optional[str] = None


@dataclass
class LearnOutcome:
    registered: bool
    support: Optional[SupportSet]
    attempts: int
    triggered: bool
    sessions: list = field(default_factory=list)


class MemoryModel:
    """Encoder, decoder, frozen latent rows and the pattern registry.

    ``encoder_rule`` selects the encoder update:
      "projection" (default) updates along the component of P orthogonal to
      the stored patterns, which keeps W_E' P_j = x*_j exact for every stored
      pattern even when patterns are correlated or supports overlap;
      "frozen_rows" rewrites only the free rows U with x*_U P' / |P|^2.
    """

    def __init__(self, params: CstlnParams, d: int, encoder_rule: str = "projection"):
        if int(d) != d or d < 1:
            raise ParameterError(f"pattern dimension must be a positive integer, got {d}")
        if encoder_rule not in ("projection", "frozen_rows"):
            raise ParameterError(f"unknown encoder rule {encoder_rule!r}")
        self.params = params
        self.d = int(d)
        self.encoder_rule = encoder_rule
        self.W_E = np.zeros((self.d, params.n))
        self.W_D = np.zeros((params.n, self.d))
        self.frozen_rows: set[int] = set()
        self.registry: list[RegistryEntry] = []
        self.latent_state = attractor_closed_form(build_network(params), 1).x.copy()

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def capacity(self) -> int:
        return self.n - 1

    def stored_patterns(self) -> np.ndarray:
        if not self.registry:
            return np.zeros((self.d, 0))
        return np.stack([e.pattern for e in self.registry], axis=1)

    def entry(self, pattern_id: str) -> RegistryEntry:
        for e in self.registry:
            if e.pattern_id == pattern_id:
                return e
        raise KeyError(pattern_id)

    def identity_errors(self) -> list[tuple[float, float]]:
        """(|W_E'P - x*|_inf, |W_D'x* - P|_inf) for every registered pattern."""
        return [(float(np.max(np.abs(encode(self, e.pattern) - e.x_star))),
                 float(np.max(np.abs(decode(self, e.x_star) - e.pattern))))
                for e in self.registry]


def cosine_similarity(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise DimensionError(f"shapes differ: {p.shape} vs {q.shape}")
    npn, nqn = np.linalg.norm(p), np.linalg.norm(q)
    if npn == 0 or nqn == 0:
        raise ParameterError("cosine similarity of a zero vector is undefined")
    return float(np.clip(p @ q / (npn * nqn), -1.0, 1.0))


def encode(model: MemoryModel, P) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.shape[-1] != model.d:
        raise DimensionError(f"pattern has length {P.shape[-1]}, model expects {model.d}")
    return P @ model.W_E


def decode(model: MemoryModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.n:
        raise DimensionError(f"latent state has length {x.shape[-1]}, model expects {model.n}")
    return x @ model.W_D


def _free_rows(model: MemoryModel, support) -> tuple[SupportSet, np.ndarray, np.ndarray]:
    sigma = SupportSet(support, model.n)
    U = [k for k in sigma if k not in model.frozen_rows]
    if not U:
        raise CapacityError(f"support {sigma} has no free latent rows (frozen: {sorted(model.frozen_rows)})")
    Uz = np.asarray(U) - 1
    Fz = np.asarray([k for k in sigma if k in model.frozen_rows], dtype=int) - 1
    return sigma, Uz, Fz


def update_encoder(model: MemoryModel, P, x_star, support) -> MemoryModel:
    """Bind P to x_star in the encoder (in place; returns the model)."""
    P = np.asarray(P, dtype=float)
    x_star = np.asarray(x_star, dtype=float)
    pn2 = float(P @ P)
    if pn2 == 0:
        raise ParameterError("pattern has zero norm")
    _, Uz, _ = _free_rows(model, support)
    if model.encoder_rule == "frozen_rows":
        model.W_E[:, Uz] = np.outer(P, x_star[Uz]) / pn2
        return model
    S = model.stored_patterns()
    if S.shape[1]:
        coef = np.linalg.lstsq(S, P, rcond=None)[0]
        P_perp = P - S @ coef
    else:
        P_perp = P
    denom = float(P_perp @ P)
    if denom <= SPAN_TOL * pn2:
        raise DegenerateEncoderError("pattern lies in the span of the stored patterns; "
                                     "no update keeps the earlier associations exact")
    resid = x_star - P @ model.W_E
    model.W_E += np.outer(P_perp, resid) / denom
    return model


def update_decoder(model: MemoryModel, P, x_star, support) -> MemoryModel:
    """Solve W_D,U' x*_U = P - W_D,F' x*_F with minimum norm (in place)."""
    P = np.asarray(P, dtype=float)
    x_star = np.asarray(x_star, dtype=float)
    _, Uz, Fz = _free_rows(model, support)
    xu = x_star[Uz]
    nu2 = float(xu @ xu)
    if nu2 == 0:
        raise DegenerateEncoderError("attractor vanishes on the free rows")
    resid = P - x_star[Fz] @ model.W_D[Fz] if Fz.size else P
    model.W_D[Uz] = np.outer(xu, resid) / nu2
    return model


def _register(model: MemoryModel, pattern: Pattern, support: SupportSet, x_star: np.ndarray):
    update_encoder(model, pattern.values, x_star, support)
    update_decoder(model, pattern.values, x_star, support)
    model.frozen_rows.update(support)
    model.registry.append(RegistryEntry(pattern.id or f"p{len(model.registry) + 1}",
                                        support, x_star.copy(), pattern.values.copy()))
    model.latent_state = x_star.copy()


def learn_pattern(model: MemoryModel, net: Network, P, cfg: Optional[SessionConfig] = None,
                  rng: Optional[np.random.Generator] = None, record: bool = False) -> LearnOutcome:
    """Present P to the memory and bind it to the next attractor of the chain.

    The model is updated in place. A presentation whose similarity to the
    decoded current state stays above threshold does not trigger and leaves
    the model untouched.
    """
    cfg = cfg or SessionConfig()
    rng = rng or np.random.default_rng()
    pattern = P if isinstance(P, Pattern) else Pattern.unit(P)
    if pattern.d != model.d:
        raise DimensionError(f"pattern has length {pattern.d}, model expects {model.d}")
    if len(model.registry) >= model.capacity:
        raise CapacityError(f"all {model.capacity} attractors are in use")

    if not model.registry:
        support = SupportSet((1, 2))
        _register(model, pattern, support, attractor_closed_form(net, 1).x)
        return LearnOutcome(True, support, 0, False)

    here = SupportSet.from_state(model.latent_state, cfg.support_tol)
    i = here[0]
    goal = SupportSet((i + 1, i + 2), model.n)
    sessions = []
    for attempt in range(1, cfg.retry_max + 2):
        out = simulate_learning(net, model.latent_state, here, model.W_D, pattern.values, cfg,
                                rng, record=record)
        sessions.append(out)
        if not out.triggered[0]:
            return LearnOutcome(False, None, attempt, False, sessions)
        if out.converged[0] and out.supports[0] == goal:
            _register(model, pattern, goal, attractor_closed_form(net, i + 1).x)
            return LearnOutcome(True, goal, attempt, True, sessions)
        log.info("learning transition %s -> %s failed (landed in %s); retrying", here, goal,
                 out.supports[0])
    raise TransitionError(f"transition {here} -> {goal} failed after {cfg.retry_max} retries")


def bind_sequence(model: MemoryModel, net: Network, patterns, ids=None) -> MemoryModel:
    """Register patterns along the chain without simulating the transitions.

    Produces the same encoder, decoder and registry as a run of learn_pattern
    in which every transition succeeds; used where only the learned weights
    matter (certificate benchmarks).
    """
    patterns = np.atleast_2d(np.asarray(patterns, dtype=float))
    if patterns.shape[1] != model.d:
        raise DimensionError(f"patterns have length {patterns.shape[1]}, model expects {model.d}")
    for k, p in enumerate(patterns):
        if len(model.registry) >= model.capacity:
            raise CapacityError(f"all {model.capacity} attractors are in use")
        i = len(model.registry) + 1
        pid = ids[k] if ids is not None else ""
        _register(model, Pattern.unit(p, pid), SupportSet((i, i + 1)), attractor_closed_form(net, i).x)
    return model


def match_registry(model: MemoryModel, support) -> Optional[str]:
    for e in model.registry:
        if e.support == support:
            return e.pattern_id
    return None


def infer_pattern(model: MemoryModel, net: Network, P_noisy, cfg: Optional[SessionConfig] = None,
                  x0=None, reference=None, cache: Optional[GainCache] = None,
                  rng: Optional[np.random.Generator] = None, record: bool = False):
    """Retrieve the stored pattern closest (in the network's sense) to P_noisy.

    x0 defaults to the model's current latent state. When ``reference`` is
    given the reported similarity compares the reconstruction with it;
    otherwise with the presented input. Returns (InferenceResult, SessionOutcome).
    """
    if not model.registry:
        raise CapacityError("no pattern has been learned yet")
    cfg = cfg or SessionConfig()
    rng = rng or np.random.default_rng(0)
    P_noisy = np.asarray(P_noisy, dtype=float)
    x_tar = encode(model, P_noisy)
    start = model.latent_state if x0 is None else np.asarray(x0, dtype=float)
    out = simulate_inference(net, start, x_tar, model.W_D, P_noisy, cfg, rng, cache=cache,
                             record=record)
    x_fin = out.final_states[0]
    rec = decode(model, x_fin)
    ref = P_noisy if reference is None else np.asarray(reference, dtype=float)
    sim = cosine_similarity(rec, ref) if np.linalg.norm(rec) > 0 else 0.0
    res = InferenceResult(rec, out.supports[0], sim, None, bool(out.converged[0]),
                          bool(out.triggered[0]), x_fin, x_tar,
                          match_registry(model, out.supports[0]))
    return res, out


def infer_batch(model: MemoryModel, net: Network, P_noisy: np.ndarray, x0,
                cfg: Optional[SessionConfig] = None, cache: Optional[GainCache] = None) -> SessionOutcome:
    """Batched inference of many presented patterns (rows of P_noisy) from x0."""
    cfg = cfg or SessionConfig()
    P_noisy = np.atleast_2d(np.asarray(P_noisy, dtype=float))
    x_tar = encode(model, P_noisy)
    return simulate_inference(net, x0, x_tar, model.W_D, P_noisy, cfg, np.random.default_rng(0),
                              cache=cache or GainCache(net, cfg.lqr))
