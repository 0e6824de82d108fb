import math

import numpy as np
import pytest

from dislodyn import dynamics as dyn
from dislodyn.fractional_op import SymbolTable
from dislodyn.layer import solve_corrector
from dislodyn.pde import (BarrierCollisionError, PdeGridError, barrier_residual, build_barrier,
                          heuristic_integrals, initial_data, pde_grid, perturbed_system,
                          run_pde, sharp_limit, stable_dt, step)

Z = dyn.zero_stress()
PAIR = dyn.ParticleConfig((-0.5, 0.5), (1, -1))


@pytest.fixture(scope="module")
def psi(half_layer):
    return solve_corrector(half_layer)


@pytest.fixture(scope="module")
def limit(half_layer):
    return sharp_limit(PAIR, Z, half_layer.gamma, 0.5)


def test_grid_rules():
    D, n = pde_grid(PAIR, 0.04)
    assert D == pytest.approx(15.0) and n & (n - 1) == 0
    assert 2 * D / n <= 0.04 / 16
    sig = dyn.separable_stress(0.3, k=1.3)
    D2, _ = pde_grid(PAIR, 0.04, sig)
    # a whole number of half periods, so the stress is periodic on the box
    assert D2 >= D and (D2 * 1.3 / math.pi) == pytest.approx(round(D2 * 1.3 / math.pi))


@pytest.mark.parametrize("kw", [dict(cells=3000), dict(cells=1024), dict(halfwidth=5.0)])
def test_grid_errors(kw):
    with pytest.raises(PdeGridError):
        pde_grid(PAIR, 0.04, **kw)


def test_initial_datum_closed_form(half_layer):
    st = initial_data(PAIR, half_layer, Z, 0.02)
    expect = 2 * (0.5 + math.atan(25.0) / math.pi) - 1
    assert st.v(np.array([0.0]))[0] == pytest.approx(expect, abs=1e-6)
    v = st.v()
    # both far ends sit near N - K - (one orientation) = 0
    assert abs(v[0]) <= 0.01 and abs(v[-1]) <= 0.01


def test_initial_datum_winding(half_layer):
    cfg = dyn.ParticleConfig((-0.5, 0.5), (1, 1))
    v = initial_data(cfg, half_layer, Z, 0.04).v()
    assert abs(v[0]) <= 0.01 and abs(v[-1] - 2) <= 0.01


def test_constant_stress_remainder(half_layer):
    eps, s0 = 0.04, 0.3
    st = initial_data(PAIR, half_layer, dyn.constant_stress(s0), eps)
    assert np.allclose(st.w.samples, eps * s0 / math.pi, rtol=0, atol=1e-15)


def test_single_layer_stationary(half_layer):
    cfg = dyn.ParticleConfig((0.123,), (1,))
    st = initial_data(cfg, half_layer, Z, 0.1)
    v0 = st.v()
    tbl, p = SymbolTable(0.5), half_layer.potential
    dt = stable_dt(0.1, 0.5, p, st.w.spacing)
    for _ in range(100):
        st = step(st, dt, Z, p, tbl)
    assert np.max(np.abs(st.v() - v0)) <= 1e-12


def test_far_field_unchanged(half_layer):
    st = initial_data(PAIR, half_layer, Z, 0.04)
    p = half_layer.potential
    new = step(st, stable_dt(0.04, 0.5, p, st.w.spacing), Z, p, SymbolTable(0.5))
    assert abs(new.v()[0] - st.v()[0]) <= 1e-10
    assert abs(new.v()[-1] - st.v()[-1]) <= 1e-10


def test_dt_cap_enforced(half_layer):
    st = initial_data(PAIR, half_layer, Z, 0.04)
    p = half_layer.potential
    cap = stable_dt(0.04, 0.5, p, st.w.spacing)
    with pytest.raises(ValueError):
        step(st, 2 * cap, Z, p, SymbolTable(0.5))
    with pytest.raises(ValueError):
        run_pde(PAIR, half_layer, Z, 0.04, 0.001, dt=2 * cap)


def test_first_order_in_time(half_layer):
    eps = 0.08
    p, tbl = half_layer.potential, SymbolTable(0.5)
    st = initial_data(PAIR, half_layer, dyn.separable_stress(0.4, k=1.0), eps)
    sig = dyn.separable_stress(0.4, k=1.0)
    H = stable_dt(eps, 0.5, p, st.w.spacing)

    def advance(m):
        s = st
        for _ in range(m):
            s = step(s, H / m, sig, p, tbl, dt_cap=H)
        return s.w.samples

    ref = advance(256)
    d1 = np.max(np.abs(advance(4) - ref))
    d2 = np.max(np.abs(advance(8) - ref))
    assert 1.6 <= d1 / d2 <= 2.4


def test_integer_shift(half_layer):
    eps = 0.08
    p, tbl = half_layer.potential, SymbolTable(0.5)
    a = initial_data(PAIR, half_layer, Z, eps)
    b = a.shifted(1)
    dt = stable_dt(eps, 0.5, p, a.w.spacing)
    for _ in range(10):
        a, b = step(a, dt, Z, p, tbl), step(b, dt, Z, p, tbl)
    assert np.max(np.abs(b.v() - a.v() - 1)) <= 1e-12


def test_comparison_persists(half_layer):
    eps = 0.08
    p, tbl = half_layer.potential, SymbolTable(0.5)
    lo = initial_data(PAIR, half_layer, Z, eps)
    hi = lo.with_w(lo.w.samples + 0.05 * np.exp(-lo.x**2))
    dt = stable_dt(eps, 0.5, p, lo.w.spacing)
    for _ in range(10):
        lo, hi = step(lo, dt, Z, p, tbl), step(hi, dt, Z, p, tbl)
        assert np.min(hi.v() - lo.v()) >= -1e-12


def test_run_hits_times_and_stays_bounded(half_layer):
    run = run_pde(PAIR, half_layer, Z, 0.08, 0.01, probes=[(0.004, 0.0), (0.01, 3.0)],
                  snapshot_times=[0.005])
    assert run.probes[:, 0].tolist() == [0.004, 0.01]
    assert run.final.t == 0.01 and 0.005 in run.snapshots
    assert -1.5 <= run.v_min and run.v_max <= 1.5
    with pytest.raises(ValueError):
        run_pde(PAIR, half_layer, Z, 0.08, 0.01, probes=[(0.02, 0.0)])


def test_sharp_limit_values(limit):
    t = 0.5 * limit.T_c
    x1, x2 = limit.fronts(t)
    assert x1 < 0 < x2
    vals = limit(t, np.array([0.0, x1 - 1, x2 + 1]))
    assert vals.tolist() == [1.0, 0.0, 0.0]
    lo, hi = limit.envelope(t, np.array([x1]))
    assert (lo[0], hi[0]) == (0.0, 1.0)
    with pytest.raises(ValueError):
        limit.fronts(limit.T_c)


def test_phase_field_near_limit(half_layer, limit):
    t = 0.5 * limit.T_c
    run = run_pde(PAIR, half_layer, Z, 0.04, t, probes=[(t, 0.0), (t, -5.0), (t, 5.0)])
    mid, left, right = run.probes[:, 2]
    assert 0.9 <= mid <= 1.1
    assert abs(left) <= 0.1 and abs(right) <= 0.1


def test_barrier_initial_ordering(half_layer, psi):
    st = initial_data(PAIR, half_layer, Z, 0.04)
    up = build_barrier("upper", 0.05, PAIR, half_layer, psi, Z, 0.04, 0.0, x=st.x)
    low = build_barrier("lower", 0.05, PAIR, half_layer, psi, Z, 0.04, 0.0, x=st.x)
    assert np.min(up.values - st.v()) >= 0
    assert np.max(low.values - st.v()) <= 0


def test_barrier_residual_small_eps(half_layer, psi, limit):
    for t in (0.0, 0.25 * limit.T_c, 0.5 * limit.T_c):
        res = barrier_residual("upper", 0.05, PAIR, half_layer, psi, Z, 0.01, t)
        assert res.worst >= 0
        assert not res.mask.all()


def test_barrier_errors(half_layer):
    with pytest.raises(ValueError):
        perturbed_system("middle", 0.05, PAIR, Z, half_layer.gamma, 0.5, 0.01)
    with pytest.raises(ValueError):
        perturbed_system("upper", 0.0, PAIR, Z, half_layer.gamma, 0.5, 0.01)
    with pytest.raises(BarrierCollisionError):
        perturbed_system("lower", 0.6, PAIR, Z, half_layer.gamma, 0.5, 0.01)
    with pytest.raises(BarrierCollisionError):
        perturbed_system("lower", 0.05, PAIR, Z, half_layer.gamma, 0.5, 1.0)


def test_heuristic_integrals(half_layer):
    lines = {ln.name: ln for ln in heuristic_integrals(half_layer, Z, 0.01, 0.0, 1.0)}
    assert lines["interaction"].value == pytest.approx(-1.0, abs=0.05)
    assert lines["energy"].value == pytest.approx(1 / (2 * math.pi), abs=1e-3)
    # the overlap decays like (eps / gap)^(1 + 2s)
    assert abs(lines["overlap"].value) <= 10 * 0.01**2
    assert lines["forcing"].value == 0.0
