import numpy as np
import pytest

from tlnmemory.data import synthetic_patterns
from tlnmemory.dynamics import IntegratorConfig, integrate, settle_batch
from tlnmemory.errors import NotEquilibriumError, ParameterError
from tlnmemory.memory import MemoryModel, bind_sequence
from tlnmemory.network import (CstlnParams, SupportSet, attractor_closed_form, build_network,
                               saddle_closed_form)
from tlnmemory.roa import (Side, alpha_max, build_fi_set, build_qc, certify_lp, certify_sdp,
                           encoder_factor, fi_parameters, local_slopes, preactivation_interval,
                           qc_value, roa_polyhedra, sector_bounds, separating_normal, shift_about,
                           side_polyhedra, side_radius, solve_at_alpha, sphere_noise,
                           validate_certificate)
from tlnmemory.numerics import LpProblem, lp_solve

P7 = CstlnParams(7, 0.9, 2.0, 1.0)


@pytest.fixture(scope="module")
def model7():
    net = build_network(P7)
    ps = synthetic_patterns(6, 60, 21)
    return net, bind_sequence(MemoryModel(P7, 60), net, ps.patterns)


# ---------------------------------------------------------------- shifted system

def test_shift_zero_is_equilibrium(net7):
    sys = shift_about(net7, attractor_closed_form(net7, 2).x)
    np.testing.assert_array_equal(sys.field(np.zeros(7)), np.zeros(7))


def test_shift_matches_original_field(net7, rng):
    from tlnmemory.network import vector_field
    x_star = attractor_closed_form(net7, 3).x
    sys = shift_about(net7, x_star)
    for z in rng.standard_normal((20, 7)):
        np.testing.assert_allclose(sys.field(z), vector_field(net7, x_star + z), atol=1e-14)


def test_phi_linearization(net7):
    sys = shift_about(net7, attractor_closed_form(net7, 3).x)
    h = 1e-7
    J = np.column_stack([(sys.phi(h * e) - sys.phi(-h * e)) / (2 * h) for e in np.eye(7)])
    D = np.diag(sys.active())
    np.testing.assert_allclose(J, D @ net7.W, atol=1e-6)


def test_shift_rejects_non_equilibrium(net7):
    with pytest.raises(NotEquilibriumError):
        shift_about(net7, np.full(7, 0.3))


def test_preactivation_interval_ball(net7):
    sys = shift_about(net7, attractor_closed_form(net7, 2).x)
    lo, hi = preactivation_interval(sys, np.eye(7), 0.3)
    norms = np.linalg.norm(net7.W, axis=1)
    np.testing.assert_allclose(hi, sys.y_star + 0.3 * norms)
    np.testing.assert_allclose(lo, sys.y_star - 0.3 * norms)
    assert norms[1] ** 2 == pytest.approx(2 * 0.1 ** 2 + 4 * 3 ** 2)
    assert hi[1] == pytest.approx(1 / 1.1 + 0.3 * np.sqrt(36.02))
    lo, hi = preactivation_interval(sys, np.eye(7), 1e-12)
    np.testing.assert_allclose(lo, sys.y_star, atol=1e-10)
    with pytest.raises(ParameterError):
        preactivation_interval(sys, np.eye(7), 0.0)


def test_local_slopes_examples():
    s_a, s_b = local_slopes(np.array([2.0, -1.0, -1.0]), np.array([-1.0, -2.0, -2.0]),
                            np.array([3.0, -0.2, 1.0]))
    np.testing.assert_allclose(s_a, [2 / 3, 0, 0])
    np.testing.assert_allclose(s_b, [1, 0, 0.5])
    with pytest.raises(ParameterError):
        local_slopes(np.array([1.0]), np.array([2.0]), np.array([3.0]))


@pytest.mark.parametrize("alpha", [0.05, 0.3, 1.0])
def test_qc_valid_on_domain(net7, rng, alpha):
    sys = shift_about(net7, attractor_closed_form(net7, 4).x)
    b = sector_bounds(sys, np.eye(7), alpha)
    u = rng.standard_normal((10_000, 7))
    u *= (rng.uniform(0, 1, 10_000) ** (1 / 7) / np.linalg.norm(u, axis=1))[:, None]
    z = alpha * u
    lam = rng.uniform(0, 2, 7)
    assert np.min(qc_value(sys, b, lam, z)) >= -1e-10


def test_qc_zero_multipliers(net7):
    s = np.full(7, 0.5)
    assert not np.any(build_qc(s, s, np.zeros(7), net7.W))
    with pytest.raises(ParameterError):
        build_qc(s, s, -np.ones(7), net7.W)


def test_qc_equality_in_degenerate_sector(net7, rng):
    s = rng.uniform(0, 1, 7)
    M = build_qc(s, s, rng.uniform(0.1, 1, 7), net7.W)
    z = rng.standard_normal(7)
    v = np.r_[z, s * (net7.W @ z)]
    assert v @ M @ v == pytest.approx(0.0, abs=1e-10)


# ---------------------------------------------------------------- SDP certificate

def test_sdp_linear_region_feasible(model7):
    net, m = model7
    sys = shift_about(net, m.registry[2].x_star)
    b = sector_bounds(sys, np.eye(7), 1e-3)
    # tiny domain: the sector collapses onto the active pattern
    np.testing.assert_array_equal(b.s_alpha, b.s_beta)
    np.testing.assert_array_equal(b.s_beta, sys.active())
    cert = solve_at_alpha(sys, encoder_factor(m.W_E), 1e-3)
    assert cert is not None and cert.verified


@pytest.fixture(scope="module")
def sdp_cert3(model7):
    net, m = model7
    e = m.registry[2]
    return certify_sdp(shift_about(net, e.x_star), m.W_E)


def test_sdp_certificate_verified(sdp_cert3):
    c = sdp_cert3
    assert c.verified and c.r > 0
    for k in ("decrease", "domain", "noise"):
        assert c.margins[k] <= -1e-9
    assert np.linalg.eigvalsh(c.P_lyap)[0] > 0
    # ellipsoid inside the sector domain z'z <= alpha^2
    assert np.linalg.eigvalsh(c.P_lyap - np.eye(7) / c.alpha ** 2)[0] > 0


def ellipsoid_samples(P, count, rng, boundary=False):
    w, V = np.linalg.eigh(P)
    u = rng.standard_normal((count, P.shape[0]))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    if not boundary:
        u *= rng.uniform(0, 1, (count, 1)) ** (1 / P.shape[0])
    return u @ (V / np.sqrt(w)).T


def test_sdp_lyapunov_decrease(model7, sdp_cert3, rng):
    net, m = model7
    x_star = m.registry[2].x_star
    P = sdp_cert3.P_lyap
    dt = 1e-2
    for z0 in ellipsoid_samples(P, 100, rng):
        tr = integrate(net, x_star + z0, cfg=IntegratorConfig(dt=dt, t_max=5))
        Z = tr.states - x_star
        V = np.einsum("bi,ij,bj->b", Z, P, Z)
        assert np.all(np.diff(V) <= 1e-12 * max(1.0, V[0]))
        assert V[-1] < V[0]


def test_sdp_boundary_settles(model7, sdp_cert3, rng):
    net, m = model7
    e = m.registry[2]
    Z = ellipsoid_samples(sdp_cert3.P_lyap, 200, rng, boundary=True)
    X, conv, _ = settle_batch(net, e.x_star + Z, IntegratorConfig(dt=1e-2, t_max=100, settle_tol=1e-10))
    assert np.all(conv)
    np.testing.assert_allclose(X, np.tile(e.x_star, (200, 1)), atol=1e-8)


def test_sdp_radius_keeps_noise_inside(model7, sdp_cert3, rng):
    net, m = model7
    eta = sphere_noise(m, sdp_cert3.r, 500, rng)
    assert np.all(sdp_cert3.contains(eta @ m.W_E))


# ---------------------------------------------------------------- invariant-set levels

def test_level_examples():
    assert not fi_parameters(CstlnParams(7, 0.4, 2.0, 1.0)).feasible
    r = fi_parameters(CstlnParams(4, 0.7, 2.5, 1.0))
    assert r.feasible
    assert r.alpha_min == pytest.approx(1 / 3.5)
    assert r.alpha_max == pytest.approx(0.487805, abs=1e-6)
    assert alpha_max(CstlnParams(7, 0.9, 2.0, 1.0)) == pytest.approx(0.8 / 0.98)


def test_level_boundary_is_golden_section_for_delta_two():
    # alpha >= c/(1+delta) = 1/3 meets beta in [c - (1-eps) alpha, (c - alpha) / (2(1-eps))]
    # exactly when eps^2 + eps - 1 >= 0
    root = (np.sqrt(5) - 1) / 2
    assert fi_parameters(CstlnParams(7, root + 1e-6, 2.0, 1.0)).feasible
    assert not fi_parameters(CstlnParams(7, root - 1e-6, 2.0, 1.0)).feasible


def test_levels_lie_in_region(rng):
    for eps in rng.uniform(0.65, 0.95, 10):
        r = fi_parameters(CstlnParams(7, float(eps), 2.0, 1.0))
        a, b = r.default_levels()
        assert r.contains(a, b)


# ---------------------------------------------------------------- separating hyperplane

def test_separating_normal_values(net7):
    w = separating_normal(net7, 4)
    assert w[1] == pytest.approx(2.9 / 3) and w[5] == pytest.approx(-2.9 / 3)
    assert w[2] == 1.0 and w[4] == -1.0 and w[3] == 0.0


def test_separating_normal_is_left_eigenvector(net7):
    i = 4
    w = separating_normal(net7, i)
    sig = [i - 2, i - 1, i]
    J = -np.eye(7) + np.diag(np.isin(np.arange(7), sig).astype(float)) @ net7.W
    np.testing.assert_allclose(w @ J, 2.0 * w, atol=1e-12)


def test_phi_at_equilibria(net7):
    a = P7.attractor_level
    for i in range(2, 7):
        w = separating_normal(net7, i)
        assert w @ saddle_closed_form(net7, i).x == pytest.approx(0.0, abs=1e-14)
        assert w @ attractor_closed_form(net7, i - 1).x == pytest.approx(a)
        assert w @ attractor_closed_form(net7, i).x == pytest.approx(-a)


def test_fi_set_contains_equilibria(net7):
    a, b = fi_parameters(P7).default_levels()
    for i in range(2, 7):
        fi = build_fi_set(net7, i, a, b)
        for x in (attractor_closed_form(net7, i - 1).x, attractor_closed_form(net7, i).x,
                  saddle_closed_form(net7, i).x):
            assert np.all(fi.A @ x <= fi.b + 1e-12)


def test_polyhedra_meet_only_on_hyperplane(net7):
    a, b = fi_parameters(P7).default_levels()
    left, right = roa_polyhedra(net7, build_fi_set(net7, 3, a, b))
    A = np.vstack([left.A, right.A])
    bb = np.r_[left.b(), right.b()]
    for sign in (1.0, -1.0):
        res = lp_solve(LpProblem(-sign * left.w, A, bb, lb=np.full(7, -np.inf)))
        assert abs(res.fun) < 1e-10


def test_polyhedron_starts_settle(net7, rng):
    from helpers import box_rows, hit_and_run
    a, b = fi_parameters(P7).default_levels()
    left, right = roa_polyhedra(net7, build_fi_set(net7, 4, a, b))
    Ab, bb = box_rows(7, 0.0, 1.0)
    cfg = IntegratorConfig(dt=1e-2, t_max=150, settle_tol=1e-10)
    for poly, m in ((left, 3), (right, 4)):
        X = hit_and_run(np.vstack([poly.A, Ab]), np.r_[poly.b(), bb], 100, rng)
        Xf, conv, _ = settle_batch(net7, X, cfg)
        assert np.all(conv)
        assert all(SupportSet.from_state(x, 1e-9) == SupportSet((m, m + 1)) for x in Xf)


# ---------------------------------------------------------------- LP certificate

def test_target_on_face_gives_zero_radius(net7):
    polys = side_polyhedra(net7, 3)
    # identity encoder: the saddle sits on the phi = 0 face of both polyhedra
    x_s = saddle_closed_form(net7, 4).x
    sr = side_radius(polys[Side.R], np.eye(7), x_s)
    assert sr.r == pytest.approx(0.0, abs=1e-12) and sr.binding == "phi>=0"


@pytest.mark.parametrize("joint", [False, True])
def test_lp_radius_is_tight(model7, rng, joint):
    net, m = model7
    e = m.registry[3]
    c = certify_lp(net, m.W_E, e.pattern, 4, joint=joint)
    assert c.r > 0
    for side, sr in c.sides.items():
        poly = side_polyhedra(net, 4)[side]
        b = poly.b(sr.alpha, sr.beta)
        x_c = e.pattern @ m.W_E
        eta = sphere_noise(m, c.r, 2000, rng, "ambient")
        assert np.all((x_c + eta @ m.W_E) @ poly.A.T <= b + 1e-12)
        # worst case along the binding row just beyond the side radius
        k = poly.labels.index(sr.binding)
        g = m.W_E @ poly.A[k]
        worst = x_c + (sr.r * (1 + 1e-6) * g / np.linalg.norm(g)) @ m.W_E
        assert poly.A[k] @ worst > b[k]


def test_joint_levels_never_worse(model7):
    net, m = model7
    for j, e in enumerate(m.registry):
        fixed = certify_lp(net, m.W_E, e.pattern, j + 1, joint=False)
        joint = certify_lp(net, m.W_E, e.pattern, j + 1, joint=True)
        assert joint.r >= fixed.r - 1e-12


def test_boundary_patterns_single_sided(model7):
    net, m = model7
    first = certify_lp(net, m.W_E, m.registry[0].pattern, 1)
    last = certify_lp(net, m.W_E, m.registry[5].pattern, 6)
    assert set(first.sides) == {Side.R} and set(last.sides) == {Side.L}
    assert any("single-sided" in f for f in first.flags)
    mid = certify_lp(net, m.W_E, m.registry[2].pattern, 3)
    assert set(mid.sides) == {Side.L, Side.R}
    assert mid.r == min(mid.r_L, mid.r_R)


def test_lp_infeasible_network_reports_zero():
    net = build_network(CstlnParams(7, 0.45, 2.0, 1.0))
    m = bind_sequence(MemoryModel(net.params, 30), net, synthetic_patterns(2, 30, 0).patterns)
    c = certify_lp(net, m.W_E, m.registry[1].pattern, 2)
    assert c.r == 0.0 and not c.sides and c.flags
    # the sector-bound path does not depend on the level LP
    s = certify_sdp(shift_about(net, m.registry[1].x_star), m.W_E)
    assert s.verified and s.r > 0


# ---------------------------------------------------------------- validation harness

def test_validation_zero_noise(model7):
    net, m = model7
    rep = validate_certificate(net, m, 2, 0.05, rho=0.0, trials=10)
    assert rep.accuracy == 1.0


def test_validation_below_lp_radius(model7):
    net, m = model7
    r = certify_lp(net, m.W_E, m.registry[2].pattern, 3).r
    rep = validate_certificate(net, m, 2, r, rho=0.99, trials=100, rng=np.random.default_rng(4))
    assert rep.accuracy == 1.0, rep.outcomes


def test_sphere_noise_norms(model7, rng):
    _, m = model7
    for mode in ("range", "ambient"):
        eta = sphere_noise(m, 0.2, 50, rng, mode)
        np.testing.assert_allclose(np.linalg.norm(eta, axis=1), 0.2)
    with pytest.raises(ValueError):
        sphere_noise(m, 0.2, 5, rng, "bogus")
