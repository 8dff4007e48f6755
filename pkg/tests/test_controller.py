import numpy as np
import pytest

from tlnmemory.controller import (LearnControlConfig, LqrAuxState, LqrConfig, TriggerConfig,
                                  TriggerState, build_inhibition, feedback_input, learning_input,
                                  linearize, lqr_aux_converge, lqr_aux_step, noise_kernel, noise_step,
                                  sigmoid, trigger_step)
from tlnmemory.errors import IndexRangeError, ParameterError
from tlnmemory.network import SupportSet, attractor_closed_form, saddle_closed_form
from tlnmemory.numerics import care_solve


def run_trigger(s, t_end, dt=1e-3, cfg=None):
    cfg = cfg or TriggerConfig()
    st = TriggerState.rest(1)
    rec = {k: [] for k in ("t", "G", "T", "q", "gamma")}
    for k in range(int(round(t_end / dt))):
        st = trigger_step(st, np.array([s]), cfg, dt)
        rec["t"].append((k + 1) * dt)
        for key in ("G", "T", "q", "gamma"):
            rec[key].append(float(np.atleast_1d(getattr(st, key))[0]))
    return {k: np.array(v) for k, v in rec.items()}


def test_gamma_half_at_threshold():
    cfg = TriggerConfig()
    st = trigger_step(TriggerState.rest(1), np.array([cfg.s_th]), cfg, 1e-3)
    assert st.gamma[0] == 0.5


def test_no_trigger_on_match():
    r = run_trigger(1.0, 300.0, dt=1e-2)
    assert np.max(r["G"]) < 1e-6


def test_pulse_shape_on_mismatch():
    cfg = TriggerConfig()
    r = run_trigger(0.0, 60.0, cfg=cfg)
    t, G, T = r["t"], r["G"], r["T"]
    assert t[np.argmax(G > 0.9)] <= 1.0
    cross = t[np.argmax(T > cfg.H)]
    assert np.all(G[(t > 1.0) & (t < cross)] > 0.9)
    after = (t > cross) & (G < 0.1)
    assert t[np.argmax(after)] - cross <= 3 * cfg.tau_d


def test_trigger_ranges_every_step(rng):
    cfg = TriggerConfig()
    st = TriggerState.rest(64)
    for _ in range(3000):
        s = rng.uniform(-1, 1, 64)
        st = trigger_step(st, s, cfg, 1e-2)
        for v in (st.G, st.q, st.gamma, st.w_gate):
            assert np.all((v >= 0) & (v <= 1))
        assert np.all(st.T >= 0)


def test_trigger_dt_validation():
    with pytest.raises(ValueError):
        trigger_step(TriggerState.rest(1), np.zeros(1), TriggerConfig(), 0.0)


def test_sigmoid_stable_for_large_arguments():
    assert sigmoid(np.array([-1e4, 0.0, 1e4])).tolist() == [0.0, 0.5, 1.0]


def test_inhibition_blocks():
    W = build_inhibition(SupportSet((2, 3)), 2.0, 7)
    expect = np.zeros((7, 7))
    expect[1, 2] = expect[2, 1] = -2.0
    np.testing.assert_array_equal(W, expect)
    W = build_inhibition(SupportSet((1, 2)), 3.0, 7)
    assert W[0, 1] == W[1, 0] == -3.0 and np.count_nonzero(W) == 2
    with pytest.raises(IndexRangeError):
        build_inhibition(SupportSet((1, 2, 3)), 1.0, 7)


def test_inhibition_zero_gain():
    # c_inh = 0 is not an admissible controller setting but the block builder is linear in it
    assert not np.any(build_inhibition(SupportSet((2, 3)), 0.0, 5))
    with pytest.raises(ParameterError):
        LearnControlConfig(c_inh=0.0)


def test_ou_stationary_variance():
    rng = np.random.default_rng(7)
    tau, dt = 1.0, 1e-3
    a = rng.standard_normal(100_000)
    for _ in range(10):
        a = noise_step(a, tau, dt, rng)
    # Euler-Maruyama keeps variance 1 / (1 - dt / (2 tau)) = 1.0005
    assert np.var(a) == pytest.approx(1.0, abs=0.01)


def test_ou_lag_one_autocorrelation():
    rng = np.random.default_rng(8)
    tau, dt = 50.0, 1e-2
    a0 = rng.standard_normal(200_000)
    a1 = noise_step(a0, tau, dt, rng)
    rho = np.corrcoef(a0, a1)[0, 1]
    assert rho == pytest.approx(1 - dt / tau, abs=5e-5)


def test_noise_saturation(rng):
    a = rng.standard_normal(1000) * 100
    k = noise_kernel(SupportSet((2, 3)), 7)
    u = learning_input(np.zeros((1000, 7)), np.zeros((7, 7)), a, k, 3.0)
    assert np.all(np.abs(u) <= 3.0 * np.max(np.abs(k)) + 1e-12)


def test_noise_kernel_forward_biased():
    k = noise_kernel(SupportSet((3, 4)), 7)
    assert np.all(k[:2] == 0)
    np.testing.assert_allclose(k[2:], np.exp(-np.array([0, 0, 1, 2, 3.0])))


def test_learning_input_without_noise(net7):
    x = attractor_closed_form(net7, 2).x
    W_inh = build_inhibition(SupportSet((2, 3)), 3.0, 7)
    u = learning_input(x, W_inh, 0.0, noise_kernel(SupportSet((2, 3)), 7), 3.0)
    np.testing.assert_allclose(u, W_inh @ x)


def test_linearize_at_attractor(net7):
    A, D = linearize(net7, attractor_closed_form(net7, 3).x)
    assert np.trace(D) == 2 and D[2, 2] == D[3, 3] == 1
    np.testing.assert_allclose(A, -np.eye(7) + D @ net7.W)


def test_linearize_at_zero(net7):
    A, D = linearize(net7, np.zeros(7))
    np.testing.assert_array_equal(D, np.eye(7))
    np.testing.assert_allclose(A, -np.eye(7) + net7.W)


def test_linearize_at_saddle(net7):
    _, D = linearize(net7, saddle_closed_form(net7, 4).x)
    assert np.trace(D) == 3


@pytest.mark.parametrize("i", [1, 3, 6])
def test_aux_flow_matches_care(net7, i):
    cfg = LqrConfig()
    x_tar = attractor_closed_form(net7, i).x
    st, _ = lqr_aux_converge(net7, x_tar, cfg)
    A, _ = linearize(net7, x_tar)
    B = cfg.r_gain * np.eye(7)
    _, K = care_solve(A, B, np.eye(7), np.eye(7))
    assert np.linalg.norm(st.K - K) <= 1e-4 * np.linalg.norm(K)
    cl = np.linalg.eigvals(A - B @ st.K)
    assert np.all(cl.real < 0)


def test_aux_d_fixed_point(net7):
    cfg = LqrConfig()
    x_tar = attractor_closed_form(net7, 2).x
    st, _ = lqr_aux_converge(net7, x_tar, cfg)
    h = x_tar @ net7.W + net7.theta
    d = np.diag(st.D)
    np.testing.assert_allclose(d[h > cfg.h_on], 1.0, atol=1e-6)
    np.testing.assert_allclose(d[h < 0], 0.0, atol=1e-6)


def test_aux_euler_and_exp_agree_for_small_steps(net7):
    cfg = LqrConfig()
    x_tar = attractor_closed_form(net7, 2).x
    s0 = LqrAuxState.initial(7, cfg)
    a = lqr_aux_step(s0, net7, x_tar, 1.0, 1e-5, scheme="euler")
    b = lqr_aux_step(s0, net7, x_tar, 1.0, 1e-5, scheme="exp")
    assert np.max(np.abs(a.K - b.K)) < 1e-6


def test_feedback_zero_at_target(rng):
    x = rng.uniform(0, 1, 7)
    K = rng.standard_normal((7, 7))
    np.testing.assert_array_equal(feedback_input(x, x, K), np.zeros(7))
    np.testing.assert_array_equal(feedback_input(x, x + 1, np.zeros((7, 7))), np.zeros(7))


def test_closed_loop_reaches_target(net7):
    from tlnmemory.session import SessionConfig, simulate_inference
    W_D = np.eye(7)      # decoded pattern is the latent state itself
    x_tar = attractor_closed_form(net7, 4).x
    cfg = SessionConfig()
    out = simulate_inference(net7, attractor_closed_form(net7, 1).x, x_tar, W_D, x_tar, cfg,
                             np.random.default_rng(0), record=True)
    tr = out.trajectory
    G = tr.aux["G"]
    assert out.triggered[0]
    # distance while the pulse is still on, just before it decays
    on = np.flatnonzero(G > 0.5)
    d = np.linalg.norm(tr.states[on[-1]] - x_tar)
    assert d < 0.05
    assert out.supports[0] == SupportSet((4, 5))
