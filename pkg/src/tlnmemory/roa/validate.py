"""Empirical soundness checks of certified radii by full inference runs."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..memory import MemoryModel, infer_batch
from ..network import Network
from ..numerics import compact_svd
from ..session import GainCache, SessionConfig


@dataclass
class ValidationReport:
    pattern_id: str
    radius: float
    rho: float
    trials: int
    correct: int
    outcomes: Counter = field(default_factory=Counter)

    @property
    def accuracy(self) -> float:
        return self.correct / self.trials if self.trials else 1.0

    def to_json(self) -> dict:
        return {"pattern": self.pattern_id, "radius": self.radius, "rho": self.rho,
                "trials": self.trials, "correct": self.correct, "accuracy": self.accuracy,
                "outcomes": {str(k): v for k, v in self.outcomes.items()}}


def sphere_noise(model: MemoryModel, radius: float, trials: int, rng: np.random.Generator,
                 mode: str = "range") -> np.ndarray:
    """Noise vectors uniform on the sphere of the given radius.

    ``mode="range"`` samples within the column space of W_E, where every
    component of the noise moves the latent target; ``mode="ambient"``
    samples in the full pattern space, where most of the noise is invisible
    to the encoder.
    """
    if mode == "range":
        U, _, _ = compact_svd(model.W_E)
        g = rng.standard_normal((trials, U.shape[1]))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        return radius * g @ U.T
    if mode == "ambient":
        g = rng.standard_normal((trials, model.d))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        return radius * g
    raise ValueError(f"unknown noise mode {mode!r}")


def start_state(model: MemoryModel, j: int) -> np.ndarray:
    """Attractor of a neighbouring registered pattern, so the controller has to act."""
    k = j + 1 if j + 1 < len(model.registry) else j - 1
    if k < 0:
        return model.latent_state.copy()
    return model.registry[k].x_star.copy()


def validate_certificate(net: Network, model: MemoryModel, j: int, radius: float, rho: float = 0.99,
                         trials: int = 1000, rng: Optional[np.random.Generator] = None,
                         cfg: Optional[SessionConfig] = None, cache: Optional[GainCache] = None,
                         mode: str = "range", chunk: int = 1000) -> ValidationReport:
    """Retrieve registry entry j from trials noisy copies at norm rho * radius."""
    rng = rng or np.random.default_rng(0)
    cfg = cfg or SessionConfig()
    cache = cache or GainCache(net, cfg.lqr)
    entry = model.registry[j]
    eta = sphere_noise(model, rho * radius, trials, rng, mode) if trials else np.zeros((0, model.d))
    x0 = start_state(model, j)
    outcomes, correct = Counter(), 0
    for s in range(0, trials, chunk):
        block = entry.pattern + eta[s:s + chunk]
        out = infer_batch(model, net, block, x0, cfg, cache)
        for sup, conv in zip(out.supports, out.converged):
            key = tuple(sup) if conv else "unsettled"
            outcomes[key] += 1
            correct += int(conv and sup == entry.support)
    return ValidationReport(entry.pattern_id, float(radius), float(rho), trials, correct, outcomes)


def failure_onset(net: Network, model: MemoryModel, j: int, radius: float, rhos: Sequence[float],
                  trials: int = 200, rng: Optional[np.random.Generator] = None,
                  cfg: Optional[SessionConfig] = None, cache: Optional[GainCache] = None,
                  mode: str = "range") -> tuple[Optional[float], list]:
    """First rho in the sweep with a wrong retrieval (None if every level passes).

    All levels run as one batch; the returned reports cover every level.
    """
    rng = rng or np.random.default_rng(0)
    cfg = cfg or SessionConfig()
    cache = cache or GainCache(net, cfg.lqr)
    entry = model.registry[j]
    rhos = [float(r) for r in rhos]
    unit = sphere_noise(model, 1.0, trials * len(rhos), rng, mode)
    scale = np.repeat(np.asarray(rhos) * radius, trials)
    out = infer_batch(model, net, entry.pattern + unit * scale[:, None], start_state(model, j), cfg, cache)
    reports, onset = [], None
    for k, rho in enumerate(rhos):
        rep = ValidationReport(entry.pattern_id, float(radius), rho, trials, 0)
        for b in range(k * trials, (k + 1) * trials):
            sup, conv = out.supports[b], out.converged[b]
            rep.outcomes[tuple(sup) if conv else "unsettled"] += 1
            rep.correct += int(conv and sup == entry.support)
        reports.append(rep)
        if onset is None and rep.correct < trials:
            onset = rho
    return onset, reports
