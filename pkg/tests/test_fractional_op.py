import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import IntegrationWarning, quad

from dislodyn.fractional_op import (GridFunction, SymbolTable, TailMismatchError, TailModel,
                                    apply, apply_decaying, apply_periodic, resample_periodic,
                                    symbol_constant)
from dislodyn.potential import make_cosine_potential


def brute_constant(s):
    """2 int_0^inf (1 - cos t) t^(-1-2s) dt split at t = 1, Fourier weight on the tail."""
    q = 1.0 + 2.0 * s
    head = quad(lambda t: 2 * math.sin(0.5 * t) ** 2 * t ** (-q), 0.0, 1.0, limit=400,
                epsabs=1e-13, epsrel=1e-11)[0]
    tail_cos = quad(lambda t: t ** (-q), 1.0, np.inf, weight="cos", wvar=1.0)[0]
    return 2.0 * (head + 1.0 / (2.0 * s) - tail_cos)


def test_symbol_constant_half():
    assert symbol_constant(0.5) == pytest.approx(math.pi, rel=1e-14)


@pytest.mark.parametrize("s", [0.25, 0.4, 0.75])
def test_symbol_constant_matches_quadrature(s):
    assert symbol_constant(s) == pytest.approx(brute_constant(s), abs=1e-8)


@pytest.mark.parametrize("s", [0.0, 1.0, -0.2])
def test_symbol_constant_domain(s):
    with pytest.raises(ValueError):
        symbol_constant(s)


@given(st.floats(0.01, 0.99))
def test_symbol_constant_positive(s):
    assert symbol_constant(s) > 0


def periodic_grid(n=256, period=2 * math.pi):
    h = period / n
    return h, -0.5 * period + h * np.arange(n)


@pytest.mark.parametrize("s", [0.3, 0.5, 0.7])
def test_periodic_constant_and_mode(s):
    h, x = periodic_grid()
    tbl = SymbolTable(s)
    c = apply_periodic(GridFunction(x[0], h, np.full(x.size, 3.0), periodic=True), tbl)
    assert np.max(np.abs(c.samples)) <= 1e-12
    for k in (1, 3, 7):
        f = GridFunction(x[0], h, np.cos(k * x), periodic=True)
        out = apply_periodic(f, tbl).samples
        expect = -symbol_constant(s) * k ** (2 * s) * np.cos(k * x)
        assert np.max(np.abs(out - expect)) <= 1e-11


def test_periodic_requires_flag_and_pow2():
    tbl = SymbolTable(0.5)
    with pytest.raises(ValueError):
        apply_periodic(GridFunction(0.0, 0.1, np.zeros(16)), tbl)
    with pytest.raises(ValueError):
        apply_periodic(GridFunction(0.0, 0.1, np.zeros(12), periodic=True), tbl)


def test_resample_then_apply():
    x = 2 * np.pi * np.arange(24) / 24
    f = GridFunction(0.0, 2 * np.pi / 24, np.sin(2 * x), periodic=True)
    g = resample_periodic(f, 32)
    out = apply_periodic(g, SymbolTable(0.5)).samples
    assert np.max(np.abs(out + math.pi * 2 * np.sin(2 * g.x))) <= 1e-11


def pv_oracle(f, x, s, Y, pieces):
    """int_0^Y (f(x+y) + f(x-y) - 2 f(x)) y^(-1-2s) dy - 2 f(x) Y^(-2s)/(2s) by adaptive quad."""
    q = 1.0 + 2.0 * s
    fx = f(x)
    g = lambda y: (f(x + y) + f(x - y) - 2 * fx) * y ** (-q)
    edges = np.concatenate([[0.0], np.geomspace(1e-2, Y, pieces)])
    # the symmetric difference loses digits as y -> 0 and quad reports it; the
    # affected piece contributes far less than the tolerances used here
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        total = sum(quad(g, a, b, limit=400, epsabs=1e-12, epsrel=1e-10)[0]
                    for a, b in zip(edges[:-1], edges[1:]))
    return total - 2 * fx * Y ** (-2 * s) / (2 * s)


def test_periodic_band_limited_against_quadrature():
    rng = np.random.default_rng(7)
    amp = rng.normal(size=5)
    ph = rng.uniform(0, 2 * np.pi, size=5)
    ks = np.arange(1, 6)

    def f(x):
        x = np.asarray(x, dtype=float)
        return np.sum(amp[:, None] * np.cos(np.outer(ks, np.atleast_1d(x)) + ph[:, None]),
                      axis=0).reshape(x.shape)

    s = 0.5
    h, x = periodic_grid(64)
    out = apply_periodic(GridFunction(x[0], h, f(x), periodic=True), SymbolTable(s)).samples
    # the oscillatory remainder beyond Y is O(Y^(-1-2s)); Y = 4000 keeps it near 1e-7
    scale = np.max(np.abs(out))
    for i in (0, 13, 40):
        ref = pv_oracle(lambda y: float(f(y)), float(x[i]), s, 4000.0, 400)
        assert abs(out[i] - ref) <= 1e-6 * scale


def gaussian_grid(h=0.025, D=20.0):
    x = -D + h * np.arange(int(round(2 * D / h)) + 1)
    return GridFunction(x[0], h, np.exp(-x**2), TailModel(0.0, 0.0))


def test_decaying_gaussian_against_quadrature():
    g = gaussian_grid(h=0.0125)
    out = apply_decaying(g, SymbolTable(0.5))
    # at the origin the Fourier integral gives exactly -2 sqrt(pi)
    assert out.samples[g.n // 2] == pytest.approx(-2 * math.sqrt(math.pi), abs=1e-6)
    f = lambda y: math.exp(-y * y)
    for x0 in (0.5, 1.7, 4.0):
        i = int(round((x0 - g.origin) / g.spacing))
        ref = pv_oracle(f, float(g.x[i]), 0.5, 1e4, 60)
        assert abs(out.samples[i] - ref) <= 1e-6


@pytest.mark.parametrize("s", [0.3, 0.5, 0.7])
def test_decaying_constants(s):
    c = GridFunction(-5.0, 0.05, np.full(201, 2.5), TailModel(2.5, 2.5))
    assert np.max(np.abs(apply_decaying(c, SymbolTable(s)).samples)) <= 1e-9


def test_arctan_layer_identity():
    L, h = 200.0, 0.05
    x = -L + h * np.arange(int(round(2 * L / h)) + 1)
    u = 0.5 + np.arctan(x) / math.pi
    f = GridFunction(x[0], h, u, TailModel(0.0, 1.0, 1.0, 1.0 / math.pi, 0.0))
    out = apply_decaying(f, SymbolTable(0.5)).samples
    w = make_cosine_potential().dW(u)
    near = np.abs(x) <= 10
    assert np.max(np.abs(out[near] - w[near])) <= 1e-5


def test_tail_mismatch_detected():
    x = -10 + 0.05 * np.arange(401)
    f = GridFunction(x[0], 0.05, 0.5 + np.arctan(x) / math.pi, TailModel(0.0, 1.0))
    with pytest.raises(TailMismatchError):
        apply_decaying(f, SymbolTable(0.5))


def test_pv_radius_too_small():
    with pytest.raises(ValueError):
        apply_decaying(gaussian_grid(), SymbolTable(0.5), pv_radius=0.01)


def test_backend_agreement_improves_with_period():
    # without the image correction the periodic result carries the copies,
    # whose influence falls off like period^(-2s)
    s, h = 0.5, 0.05
    tbl = SymbolTable(s)
    errs = []
    for D in (12.8, 25.6, 51.2):
        n = int(round(2 * D / h))
        x = -D + h * np.arange(n)
        f = np.exp(-x**2)
        a = apply_periodic(GridFunction(-D, h, f, periodic=True), tbl).samples
        b = apply_decaying(GridFunction(-D, h, f, TailModel(0.0, 0.0)), tbl).samples
        mid = np.abs(x) <= 3
        errs.append(float(np.max(np.abs(a - b)[mid])))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 0.3 * errs[0]


def test_dispatch():
    g = gaussian_grid()
    assert np.array_equal(apply(g, SymbolTable(0.5)).samples,
                          apply_decaying(g, SymbolTable(0.5)).samples)


coeffs = st.floats(-3, 3, allow_nan=False, allow_infinity=False)


@settings(max_examples=25, deadline=None)
@given(a=coeffs, b=coeffs, s=st.sampled_from([0.3, 0.5, 0.7]))
def test_linearity_both_backends(a, b, s):
    tbl = SymbolTable(s)
    h, x = periodic_grid(128)
    f, g = np.cos(x) + 0.2 * np.sin(3 * x), np.sin(2 * x)
    P = lambda v: apply_periodic(GridFunction(x[0], h, v, periodic=True), tbl).samples
    assert np.allclose(P(a * f + b * g), a * P(f) + b * P(g), atol=1e-11)
    d = gaussian_grid(0.05, 10.0)
    e = d.with_samples(d.x * d.samples)
    D = lambda v: apply_decaying(d.with_samples(v), tbl).samples
    assert np.allclose(D(a * d.samples + b * e.samples), a * D(d.samples) + b * D(e.samples),
                       atol=1e-11)


@settings(max_examples=15, deadline=None)
@given(k=st.integers(1, 6), s=st.floats(0.2, 0.8))
def test_odd_symmetry(k, s):
    tbl = SymbolTable(s)
    h, x = periodic_grid(128)
    out = apply_periodic(GridFunction(x[0], h, np.sin(k * x), periodic=True), tbl).samples
    # x[0] = -pi pairs with itself; node j pairs with n - j
    assert np.allclose(out[1:], -out[1:][::-1], atol=1e-12)
    d = gaussian_grid(0.05, 10.0)
    odd = apply_decaying(d.with_samples(d.x * d.samples), tbl).samples
    assert np.allclose(odd, -odd[::-1], atol=1e-10)
