import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dislodyn import dynamics as dyn

TWO_PI = 2 * math.pi
Z = dyn.zero_stress()


def pair(theta0=1.0, z=(1, -1)):
    return dyn.ParticleConfig((0.0, theta0), z)


def test_velocity_two_opposite():
    v = dyn.velocity_field(0.0, [0.0, 1.0], pair(), Z, TWO_PI, 0.5)
    assert v == pytest.approx([TWO_PI, -TWO_PI], rel=1e-15)


def test_same_sign_repels():
    v = dyn.velocity_field(0.0, [0.0, 0.7], pair(0.7, (1, 1)), Z, 1.0, 0.3)
    assert v[0] < 0 < v[1]


@settings(max_examples=30, deadline=None)
@given(c=st.floats(-50, 50), s=st.floats(0.1, 0.9))
def test_translation_invariance(c, s):
    cfg = dyn.ParticleConfig((0.0, 0.8, 2.0), (1, -1, -1))
    a = dyn.velocity_field(0.0, cfg.x0, cfg, Z, 1.0, s)
    b = dyn.velocity_field(0.0, cfg.x0 + c, cfg, Z, 1.0, s)
    assert np.allclose(a, b, rtol=1e-9, atol=1e-9)


def test_pairwise_antisymmetry():
    x = np.array([0.0, 1.0])
    for z in ((1, -1), (1, 1), (-1, -1)):
        v = dyn.velocity_field(0.0, x, pair(1.0, z), Z, 3.0, 0.4)
        assert v[0] == pytest.approx(-v[1], rel=1e-15)


def test_potential_value_log_branch():
    assert dyn.potential_value(0.0, [0.0, 1.0], pair(), Z, TWO_PI, 0.5)["V0"] == 0.0


@pytest.mark.parametrize("s", [0.3, 0.5, 0.7])
def test_gradient_structure(s):
    rng = np.random.default_rng(11)
    sigma = dyn.separable_stress(0.3, 0.5, 2.0, 1.3, 0.2)
    for _ in range(20):
        cfg = dyn.random_admissible(rng, 4)
        assert dyn.gradient_mismatch(0.37, cfg.x0, cfg, sigma, TWO_PI, s) <= 1e-6


def test_config_validation():
    with pytest.raises(ValueError):
        dyn.ParticleConfig((1.0, 0.0), (1, -1))
    with pytest.raises(ValueError):
        dyn.ParticleConfig((0.0, 1.0), (1, 0))
    with pytest.raises(ValueError):
        dyn.ParticleConfig((0.0, 1.0), (1,))
    cfg = dyn.ParticleConfig((0, 1, 2), (1, -1, -1))
    assert cfg.K == 2 and cfg.N == 3


def test_stress_kinds():
    with pytest.raises(ValueError):
        dyn.StressField("ramp")
    s = dyn.separable_stress(0.4, 0.5, 3.0, 2.0)
    assert s.check() <= 1.0
    assert s.bound >= s.sup_norm > 0
    assert dyn.constant_stress(-0.2).nonpositive
    assert Z.is_zero


def test_two_body_collision_time():
    tr, rep = dyn.integrate(pair(), Z, TWO_PI, 0.5, horizon=1.0)
    assert rep.collided and rep.classification == "pairwise"
    assert rep.T_c == pytest.approx(1 / (8 * math.pi), abs=1e-5)
    assert rep.t_hi - rep.t_lo >= 0
    assert np.all(tr.theta[:, 0] > 0)


def test_triple_collision():
    cfg = dyn.ParticleConfig((-1.0, 0.0, 1.0), (1, -1, 1))
    tr, rep = dyn.integrate(cfg, Z, TWO_PI, 0.5, horizon=1.0)
    assert rep.classification == "triple"
    assert rep.T_c == pytest.approx(1 / (2 * math.pi), abs=1e-4)
    th, resid = dyn.theta_trajectories(tr, cfg, TWO_PI, 0.5)
    assert np.array_equal(th[:, 0], th[:, 1])
    assert resid <= 10 * 1e-10  # ten times the default ode_tol


def test_order_preserved():
    cfg = dyn.ParticleConfig((0.0, 0.8, 2.0), (1, -1, 1))
    tr, rep = dyn.integrate(cfg, Z, TWO_PI, 0.5, horizon=1.0)
    th = tr.theta
    assert rep.collided
    assert np.all(th[:, 0] < th[:, 1])


def test_repulsive_pair_never_collides():
    tr, rep = dyn.integrate(pair(1.0, (1, 1)), Z, TWO_PI, 0.5, horizon=2.0)
    assert rep.classification == "none-by-horizon" and not rep.collided
    assert np.all(np.diff(tr.theta[:, 0]) >= 0)


def test_energy_nonincreasing():
    cfg = dyn.ParticleConfig((0.0, 0.9, 2.1, 2.9), (1, -1, 1, 1))
    tr, rep = dyn.integrate(cfg, Z, TWO_PI, 0.5, horizon=1.0)
    assert np.all(np.diff(tr.V0) <= 1e-12 * np.maximum(1.0, np.abs(tr.V0[1:])))


@pytest.mark.parametrize("s", [0.5, 0.3])
def test_scaling_law(s):
    T = [dyn.integrate(pair(lam), Z, TWO_PI, s, horizon=10.0)[1].T_c for lam in (1.0, 2.0)]
    assert T[1] / T[0] == pytest.approx(2.0 ** (2 * s + 1), rel=1e-6)


def test_stationary_gap_under_positive_stress():
    s, sigma0 = 0.5, 0.5
    theta0 = (1 / (2 * s * sigma0)) ** (1 / (2 * s))
    tr, rep = dyn.integrate(pair(theta0), dyn.constant_stress(sigma0), TWO_PI, s, horizon=1.0)
    assert not rep.collided
    assert np.max(np.abs(tr.theta[:, 0] - theta0)) <= 1e-9


def test_flip_and_reflection():
    cfg = dyn.ParticleConfig((-0.3, 0.5, 1.4), (1, -1, 1))
    sigma = dyn.separable_stress(0.2, 0.0, 0.0, 1.0, 0.3)
    base, rb = dyn.integrate(cfg, sigma, TWO_PI, 0.5, horizon=1.0)
    flip, rf = dyn.integrate(cfg.flipped(), sigma.negated(), TWO_PI, 0.5, horizon=1.0)
    assert np.array_equal(base.x, flip.x) and rb.T_c == rf.T_c
    # reversing space also reverses each layer, so the stress changes sign as well
    refl, rr = dyn.integrate(cfg.reflected(), sigma.reflected().negated(), TWO_PI, 0.5,
                             horizon=1.0)
    assert rr.T_c == pytest.approx(rb.T_c, rel=1e-9)
    mid = 0.5 * rb.T_c
    assert np.allclose(refl.position(mid), -base.position(mid)[::-1], atol=1e-9)


def test_max_a0():
    assert dyn.max_a0(3, 0.5) == pytest.approx(0.5, abs=1e-12)
    assert dyn.max_a0(2, 0.3) == 1.0
    with pytest.raises(ValueError):
        dyn.max_a0(1, 0.5)


@settings(max_examples=20, deadline=None)
@given(N=st.integers(3, 8), s=st.floats(0.1, 0.9))
def test_max_a0_is_root(N, s):
    a = dyn.max_a0(N, s)
    assert 0 < a < 1
    f = lambda v: -1 + (N - 2) * v ** (2 * s) + (N - 1) * v ** (2 * s + 1)
    assert abs(f(a)) <= 1e-9
    assert f(0.5 * a) < 0 < f(min(1.0, 1.5 * a))


def test_bounds_two_body_exact():
    cfg = pair()
    _, rep = dyn.integrate(cfg, Z, TWO_PI, 0.5, horizon=1.0)
    checks = {c.theorem: c for c in dyn.collision_bounds(cfg, Z, TWO_PI, 0.5, rep)}
    c = checks["two_layer_nonpositive_stress"]
    assert c.passed and c.bounds["upper"] == pytest.approx(1 / (8 * math.pi), rel=1e-15)
    assert abs(c.margin) <= 1e-5


def test_bounds_three_layer_bracket():
    cfg = dyn.ParticleConfig((0.0, 0.8, 2.0), (1, -1, 1))
    _, rep = dyn.integrate(cfg, Z, TWO_PI, 0.5, horizon=1.0)
    c = {r.theorem: r for r in dyn.collision_bounds(cfg, Z, TWO_PI, 0.5, rep)}
    b = c["three_layer_bracket"]
    assert b.passed and b.bounds["lower"] <= rep.T_c <= b.bounds["upper"]
    assert b.bounds["upper"] == pytest.approx(4 * b.bounds["lower"], rel=1e-15)


def test_bounds_alternating_five():
    cfg = dyn.ParticleConfig((0.0, 1.0, 2.0, 3.0, 4.0), (1, -1, 1, -1, 1))
    _, rep = dyn.integrate(cfg, Z, TWO_PI, 0.5, horizon=10.0)
    c = {r.theorem: r for r in dyn.collision_bounds(cfg, Z, TWO_PI, 0.5, rep)}
    alt = c["alternating_odd"]
    assert alt.bounds["upper"] == pytest.approx(4 * 16 / (2 * TWO_PI), rel=1e-15)
    assert alt.passed


def test_cone_invariance():
    cfg = dyn.ParticleConfig.from_gaps([0.2, 1.0, 1.0], (1, -1, 1, -1))
    a0 = 0.99 * dyn.max_a0(4, 0.5)
    assert 0.2 <= a0
    tr, rep = dyn.integrate(cfg, Z, TWO_PI, 0.5, horizon=10.0)
    assert np.all(dyn.cone_ratio(tr, 0) <= a0)
    c = [r for r in dyn.collision_bounds(cfg, Z, TWO_PI, 0.5, rep) if r.theorem == "small_gap_cone"]
    assert c and all(r.passed for r in c)


def test_inapplicable_reported():
    cfg = pair(3.0)
    sigma = dyn.constant_stress(0.5)
    _, rep = dyn.integrate(cfg, sigma, TWO_PI, 0.5, horizon=0.5)
    res = {r.theorem: r for r in dyn.collision_bounds(cfg, sigma, TWO_PI, 0.5, rep)}
    assert not res["two_layer_nonpositive_stress"].hypothesis
    assert not res["two_layer_small_gap"].hypothesis


def test_integrate_arguments():
    with pytest.raises(ValueError):
        dyn.integrate(pair(), Z, TWO_PI, 0.5, horizon=0.0)
    with pytest.raises(ValueError):
        dyn.integrate(pair(), Z, TWO_PI, 1.5, horizon=1.0)
    tr, _ = dyn.integrate(pair(), Z, TWO_PI, 0.5, horizon=1.0)
    with pytest.raises(ValueError):
        tr.position(1.0)
