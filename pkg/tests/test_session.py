import numpy as np
import pytest

from tlnmemory.memory import MemoryModel, bind_sequence, cosine_similarity, encode
from tlnmemory.data import synthetic_patterns
from tlnmemory.network import attractor_closed_form
from tlnmemory.session import GainCache, LatentSimilarity, SessionConfig, simulate_inference
from tlnmemory.controller import LqrConfig


def test_latent_similarity_matches_decoded_cosine(rng):
    W_D = rng.standard_normal((7, 40))
    P = rng.random(40)
    sim = LatentSimilarity(W_D, P)
    X = rng.standard_normal((30, 7))
    want = [cosine_similarity(x @ W_D, P) for x in X]
    np.testing.assert_allclose(sim(X), want, atol=1e-12)


def test_latent_similarity_zero_state(rng):
    sim = LatentSimilarity(rng.standard_normal((7, 10)), rng.random(10))
    assert sim(np.zeros((1, 7)))[0] == 0.0
    with pytest.raises(ValueError):
        LatentSimilarity(np.ones((7, 10)), np.zeros(10))


def test_gain_cache_shares_masks(net7):
    cache = GainCache(net7, LqrConfig())
    x = attractor_closed_form(net7, 3).x
    K1 = cache.gain(x)
    K2 = cache.gain(1.001 * x)
    assert K1 is K2 and len(cache._store) == 1
    cache.gain(attractor_closed_form(net7, 4).x)
    assert len(cache._store) == 2


@pytest.mark.parametrize("i", [1, 4])
def test_gain_cache_flow_matches_care(net7, i):
    x = attractor_closed_form(net7, i).x
    Kf = GainCache(net7, LqrConfig(), "flow").gain(x)
    Kc = GainCache(net7, LqrConfig(), "care").gain(x)
    np.testing.assert_allclose(Kf, Kc, atol=1e-3 * np.abs(Kc).max())
    with pytest.raises(ValueError):
        GainCache(net7, LqrConfig(), "bogus").gain(x)


def test_batched_inference_matches_single(net7):
    ps = synthetic_patterns(3, 30, 5)
    m = bind_sequence(MemoryModel(net7.params, 30), net7, ps.patterns)
    cfg = SessionConfig()
    X_tar = encode(m, ps.patterns)
    x0 = m.registry[0].x_star
    cache = GainCache(net7, cfg.lqr)
    batch = simulate_inference(net7, x0, X_tar, m.W_D, ps.patterns, cfg,
                               np.random.default_rng(0), cache=cache)
    for k in range(3):
        one = simulate_inference(net7, x0, X_tar[k], m.W_D, ps.patterns[k], cfg,
                                 np.random.default_rng(0), cache=cache)
        np.testing.assert_allclose(one.final_states[0], batch.final_states[k], atol=1e-9)
        assert one.supports[0] == batch.supports[k] == m.registry[k].support
