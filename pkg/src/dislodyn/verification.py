"""Named acceptance checks, each a self-contained numerical experiment.

Every check returns a list of :class:`Outcome` lines.  The command line
runs them by number through the ``verify`` experiment, and the shipped presets
select one check each.
"""
from __future__ import annotations

import functools
import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.special import zeta as hurwitz_zeta

from . import dynamics as dyn
from .fractional_op import (
    GridFunction,
    SymbolTable,
    TailModel,
    apply_decaying,
    apply_periodic,
    symbol_constant,
)
from .layer import check_tail, solve_corrector, solve_layer
from .pde import (
    barrier_residual,
    build_barrier,
    collision_memory_probe,
    heuristic_integrals,
    initial_data,
    run_pde,
    sharp_limit,
    stable_dt,
    step,
)
from .potential import make_cosine_potential
from .reporting import csv_text

GAMMA_HALF = 2.0 * math.pi  # layer energy constant at s = 1/2, cosine potential


@dataclass
class Outcome:
    criterion: int
    name: str
    passed: bool
    measured: float
    bound: str
    note: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        text = f"[{tag}] {self.criterion:>2} {self.name}: measured {self.measured:.6g} ({self.bound})"
        return text + (f"; {self.note}" if self.note else "")

    def as_dict(self) -> dict:
        return {"criterion": self.criterion, "name": self.name, "passed": self.passed,
                "measured": self.measured, "bound": self.bound, "note": self.note}


def _rel(a: float, b: float) -> float:
    return abs(a - b) / abs(b)


def _timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


def _runtime(c: int, elapsed: float, budget: float) -> Outcome:
    return Outcome(c, "runtime", elapsed < budget, elapsed, f"< {budget:g} s")


def two_body_config(theta0: float = 1.0) -> dyn.ParticleConfig:
    return dyn.ParticleConfig((-0.5 * theta0, 0.5 * theta0), (1, -1))


def triple_config(gap: float = 1.0) -> dyn.ParticleConfig:
    return dyn.ParticleConfig((-gap, 0.0, gap), (1, -1, 1))


# ---------------------------------------------------------------------------
# particle system


def check_two_body(gamma: float = GAMMA_HALF, s: float = 0.5) -> list:
    z0 = dyn.zero_stress()
    cfg = two_body_config()
    (tr, rep), el = _timed(dyn.integrate, cfg, z0, gamma, s, 1.0)
    exact = dyn.two_layer_time(1.0, gamma, s)
    err = _rel(rep.T_c, exact) if rep.collided else math.inf
    out = [Outcome(1, "two-body T_c", err <= 1e-5, rep.T_c,
                   f"1/(8 pi) = {exact:.10g} within 1e-5 relative", f"rel err {err:.2e}")]
    for chk in dyn.collision_bounds(cfg, z0, gamma, s, rep):
        if chk.hypothesis:
            out.append(Outcome(1, chk.theorem, chk.passed, chk.measured,
                               f"bound {chk.bounds.get('upper', float('nan')):.10g}"))
    out.append(_runtime(1, el, 1.0))
    return out


def check_triple(gamma: float = GAMMA_HALF, s: float = 0.5) -> list:
    z0 = dyn.zero_stress()
    (tr, rep), el = _timed(dyn.integrate, triple_config(), z0, gamma, s, 1.0)
    exact = dyn.c_s(s) * dyn.two_layer_time(1.0, gamma, s)
    err = _rel(rep.T_c, exact) if rep.collided else math.inf
    return [
        Outcome(2, "triple classification", rep.classification == "triple", len(rep.pairs),
                "triple", rep.classification),
        Outcome(2, "triple T_c", err <= 1e-4, rep.T_c,
                f"1/(2 pi) = {exact:.10g} within 1e-4 relative", f"rel err {err:.2e}"),
        _runtime(2, el, 1.0),
    ]


def check_bracket(gamma: float = GAMMA_HALF, s_values=(0.3, 0.5, 0.7)) -> list:
    z0 = dyn.zero_stress()
    cfg = dyn.ParticleConfig.from_gaps([0.8, 1.2], (1, -1, 1))
    out = []
    t0 = time.perf_counter()
    for s in s_values:
        tr, rep = dyn.integrate(cfg, z0, gamma, s, 10.0)
        tau = s * 0.8 ** (2 * s + 1) / ((2 * s + 1) * gamma)
        hi = dyn.c_s(s) * tau
        ok = rep.collided and tau <= rep.T_c <= hi
        out.append(Outcome(3, f"bracket s={s:g}", bool(ok), rep.T_c,
                           f"[{tau:.6g}, {hi:.6g}]"))
        th = tr.theta
        margin = float(np.min(th[:, 1] - th[:, 0]))
        out.append(Outcome(3, f"order theta_1 < theta_2 s={s:g}", margin > 0.0, margin,
                           "min(theta_2 - theta_1) > 0", f"{len(tr.t)} recorded times"))
    out.append(_runtime(3, time.perf_counter() - t0, 5.0))
    return out


def check_scaling(gamma: float = GAMMA_HALF, s: float = 0.5, lams=(0.5, 2.0)) -> list:
    z0 = dyn.zero_stress()
    out = []
    for name, cfg in (("two-body", two_body_config()), ("triple", triple_config())):
        base = dyn.integrate(cfg, z0, gamma, s, 1.0)[1].T_c
        for lam in lams:
            tc = dyn.integrate(cfg.scaled(lam), z0, gamma, s, 10.0)[1].T_c
            err = _rel(tc / base, lam ** (2 * s + 1))
            out.append(Outcome(4, f"scaling {name} lambda={lam:g}", err <= 1e-3, tc / base,
                               f"lambda^(2s+1) = {lam ** (2 * s + 1):g} within 1e-3",
                               f"rel err {err:.2e}"))
    return out


def _sigma0_runs(gamma: float, s: float = 0.5) -> list:
    """Zero-stress trajectories of the particle-system checks."""
    z0 = dyn.zero_stress()
    cfgs = [two_body_config(), triple_config(),
            dyn.ParticleConfig.from_gaps([0.8, 1.2], (1, -1, 1)),
            dyn.ParticleConfig.from_gaps([1.0, 0.05, 1.0], (1, -1, 1, -1)),
            dyn.ParticleConfig.from_gaps([1.0] * 3, (1, -1, 1, -1)),
            dyn.ParticleConfig.from_gaps([1.0] * 4, (1, -1, 1, -1, 1))]
    return [dyn.integrate(c, z0, gamma, s, 10.0)[0] for c in cfgs]


def check_gradient(gamma: float = GAMMA_HALF, seed: int = 0, count: int = 20) -> list:
    rng = np.random.default_rng(seed)
    sig = dyn.separable_stress(0.3, 0.5, 2.0, 1.3, 0.2)
    out = []
    for s in (0.3, 0.5, 0.7):
        worst = 0.0
        for _ in range(count):
            cfg = dyn.random_admissible(rng, int(rng.integers(2, 7)))
            t = float(rng.uniform(0.0, 2.0))
            worst = max(worst, dyn.gradient_mismatch(t, cfg.x0, cfg, sig, gamma, s))
        out.append(Outcome(7, f"-grad V vs velocity s={s:g}", worst <= 1e-6, worst,
                           "<= 1e-6 relative", f"{count} random configurations"))
    worst = -math.inf
    for tr in _sigma0_runs(gamma):
        dv = np.diff(tr.V0) / np.maximum(1.0, np.abs(tr.V0[1:]))
        worst = max(worst, float(np.max(dv)))
    out.append(Outcome(7, "V0 nonincreasing", worst <= 1e-10, worst,
                       "max relative increase <= 1e-10"))
    return out


def check_cone(gamma: float = GAMMA_HALF, s: float = 0.5) -> list:
    z0 = dyn.zero_stress()
    cfg = dyn.ParticleConfig.from_gaps([1.0, 0.05, 1.0], (1, -1, 1, -1))
    a0 = dyn.DEFAULT_A0_SAFETY * dyn.max_a0(4, s)
    (tr, rep), el = _timed(dyn.integrate, cfg, z0, gamma, s, 10.0)
    ratio = float(np.max(dyn.cone_ratio(tr, 1)))
    out = [Outcome(8, "cone ratio", ratio <= a0, ratio, f"<= a0 = {a0:.6g}",
                   f"{len(tr.t)} recorded times")]
    for chk in dyn.collision_bounds(cfg, z0, gamma, s, rep):
        if chk.theorem == "small_gap_cone":
            out.append(Outcome(8, "cone collision bound", chk.passed, chk.measured,
                               f"<= {chk.bounds['upper']:.6g}"))
    out.append(_runtime(8, el, 5.0))
    return out


def check_alternating(gamma: float = GAMMA_HALF, s: float = 0.5) -> list:
    z0 = dyn.zero_stress()
    out = []
    t0 = time.perf_counter()
    for N in (4, 5):
        cfg = dyn.ParticleConfig.from_gaps([1.0] * (N - 1), tuple((-1) ** i for i in range(N)))
        tr, rep = dyn.integrate(cfg, z0, gamma, s, 10.0)
        out.append(Outcome(9, f"collision N={N}", rep.collided, rep.T_c, "collision detected",
                           rep.classification))
        for chk in dyn.collision_bounds(cfg, z0, gamma, s, rep):
            if chk.theorem.startswith("alternating"):
                out.append(Outcome(9, f"{chk.theorem} N={N}", chk.passed, chk.measured,
                                   f"<= {chk.bounds['upper']:.6g}"))
    out.append(_runtime(9, time.perf_counter() - t0, 5.0))
    return out


# ---------------------------------------------------------------------------
# layer and operator


def check_layer(L: float = 40.0, h: float = 0.05) -> list:
    p = make_cosine_potential()
    lp, el = _timed(solve_layer, p, 0.5, L, h)
    x = lp.x[np.abs(lp.x) <= 10.0]
    dev = float(np.max(np.abs(lp(x) - (0.5 + np.arctan(x) / np.pi))))
    tail = check_tail(lp)
    return [
        Outcome(5, "profile vs 1/2 + arctan(x)/pi", dev <= 1e-4, dev, "<= 1e-4 on |x| <= 10"),
        Outcome(5, "gamma", abs(lp.gamma - 2 * np.pi) <= 1e-3, lp.gamma, "2 pi +- 1e-3"),
        Outcome(5, "beta", abs(lp.beta - np.pi) <= 1e-12, lp.beta, "pi"),
        Outcome(5, "eta", abs(lp.eta - 1 / (2 * np.pi**2)) <= 1e-3, lp.eta,
                "1/(2 pi^2) +- 1e-3"),
        Outcome(5, "tail fit exponent", tail.kappa_exceeds_2s, tail.kappa_fit, "> 2s = 1"),
        _runtime(5, el, 60.0),
    ]


def periodic_images(x: np.ndarray, f: np.ndarray, h: float, period: float, s: float) -> np.ndarray:
    """Contribution of the periodic copies of a localized ``f`` to ``I_s``.

    ``sum_{m != 0} int f(z) |x - z + m P|^(-1-2s) dz`` by the trapezoidal rule in
    ``z`` and Hurwitz zeta sums in ``m``.
    """
    a = (x[:, None] - x[None, :]) / period
    q = 1.0 + 2.0 * s
    k = period ** (-q) * (hurwitz_zeta(q, 1.0 + a) + hurwitz_zeta(q, 1.0 - a))
    return h * (k @ f)


def check_operator(h: float = 0.025, n: int = 2048) -> list:
    c = symbol_constant(0.5)
    out = [Outcome(6, "c(1/2)", abs(c - np.pi) <= 1e-8, c, "pi within 1e-8")]
    D = 0.5 * n * h
    x = -D + h * np.arange(n)
    worst_const, worst_agree = 0.0, 0.0
    for s in (0.3, 0.5, 0.7):
        tbl = SymbolTable(s)
        for const in (1.0, -2.5):
            ones = np.full(n, const)
            a = apply_periodic(GridFunction(-D, h, ones, periodic=True), tbl).samples
            b = apply_decaying(GridFunction(-D, h, ones, TailModel(const, const)), tbl).samples
            worst_const = max(worst_const, float(np.max(np.abs(a))), float(np.max(np.abs(b))))
        f = np.exp(-0.5 * x**2)
        a = apply_periodic(GridFunction(-D, h, f, periodic=True), tbl).samples
        a = a - periodic_images(x, f, h, 2 * D, s)
        b = apply_decaying(GridFunction(-D, h, f, TailModel(0.0, 0.0)), tbl).samples
        worst_agree = max(worst_agree, float(np.max(np.abs(a - b))))
    out.append(Outcome(6, "constants annihilated", worst_const <= 1e-12, worst_const,
                       "<= 1e-12, both backends"))
    out.append(Outcome(6, "backend agreement", worst_agree <= 1e-6, worst_agree,
                       "<= 1e-6 on a Gaussian", f"h = {h:g}, periodic images removed"))
    return out


# ---------------------------------------------------------------------------
# phase field


def _half_layer():
    p = make_cosine_potential()
    return solve_layer(p, 0.5, 40.0, 0.05)


def check_sharp_limit(eps_list=(0.08, 0.04, 0.02)) -> list:
    lp = _half_layer()
    cfg = two_body_config()
    sig = dyn.zero_stress()
    t0 = time.perf_counter()
    lim = sharp_limit(cfg, sig, lp.gamma, 0.5)
    t = 0.5 * lim.T_c
    probes = [(t, 0.0), (t, -5.0), (t, 5.0)]
    mid, outside = [], []
    for eps in eps_list:
        run = run_pde(cfg, lp, sig, eps, t, probes)
        err = np.abs(run.probes[:, 2] - lim(t, run.probes[:, 1]))
        mid.append(float(err[0]))
        outside.append(float(max(err[1], err[2])))
    el = time.perf_counter() - t0
    return [
        Outcome(10, "midpoint error decreasing", bool(np.all(np.diff(mid) < 0)), mid[-1],
                "monotone in eps", " ".join(f"{e:.4g}" for e in mid)),
        Outcome(10, "outside error decreasing", bool(np.all(np.diff(outside) < 0)), outside[-1],
                "monotone in eps", " ".join(f"{e:.4g}" for e in outside)),
        Outcome(10, "final midpoint error", mid[-1] <= 0.1, mid[-1], "<= 0.1"),
        Outcome(10, "final outside error", outside[-1] <= 0.15, outside[-1], "<= 0.15"),
        _runtime(10, el, 600.0),
    ]


@functools.lru_cache(maxsize=4)
def _memory_probe(eps_list: tuple, levels: int):
    """The probe is deterministic and costly; both reports share one run."""
    lp = _half_layer()
    return _timed(collision_memory_probe, two_body_config(), lp, dyn.zero_stress(),
                  lp.gamma, eps_list, levels)


def check_memory(eps_list=(0.08, 0.04, 0.02), levels: int = 4) -> list:
    rep, el = _memory_probe(tuple(eps_list), levels)
    trend = " ".join(f"{v:.4g}" for v in rep.per_eps_max)
    return [
        Outcome(11, "lattice max v(x_c)", rep.lattice_max >= 0.9, rep.lattice_max, ">= 0.9"),
        Outcome(11, "off-center probes", rep.off_center_last <= 0.15, rep.off_center_last,
                "<= 0.15 at smallest eps, latest t"),
        Outcome(11, "refinement trend", rep.refinement_nondecreasing, rep.per_eps_max[-1],
                "per-eps max nondecreasing as eps decreases", trend),
        _runtime(11, el, 900.0),
    ]


def memory_time_trend(eps_list=(0.08, 0.04, 0.02), levels: int = 4):
    """Report-only: ``v_eps(t, x_c)`` along the time schedule for the smallest eps."""
    return _memory_probe(tuple(eps_list), levels)[0]


def check_barrier(eps: float = 0.04, delta: float = 0.05, tol: float = 5e-3) -> list:
    lp = _half_layer()
    psi = solve_corrector(lp)
    cfg = two_body_config()
    sig = dyn.zero_stress()
    t0 = time.perf_counter()
    Tc = dyn.two_layer_time(1.0, lp.gamma, 0.5)
    times = [0.0, 0.25 * Tc, 0.5 * Tc]
    run = run_pde(cfg, lp, sig, eps, times[-1], snapshot_times=times)
    out = []
    for t in times:
        x, v = run.snapshots[t]
        bar = build_barrier("upper", delta, cfg, lp, psi, sig, eps, t, x=x)
        gap = float(np.min(bar.values - v))
        out.append(Outcome(12, f"vbar >= v at t={t:.5g}", gap >= -tol, gap, f">= -{tol:g}"))
    for t in times:
        res = barrier_residual("upper", delta, cfg, lp, psi, sig, eps, t, x=run.snapshots[t][0])
        out.append(Outcome(12, f"I_eps sign at t={t:.5g}", res.worst >= -tol, res.worst,
                           f">= -{tol:g} beyond 2 eps of the fronts"))
    out.append(_runtime(12, time.perf_counter() - t0, 300.0))
    return out


def check_heuristics(eps: float = 0.01) -> list:
    lp = _half_layer()
    sig = dyn.separable_stress(0.3, 0.5, 2.0, 1.0, 0.4)
    lines = heuristic_integrals(lp, sig, eps, 0.0, 1.0, t=0.1)
    return [Outcome(13, ln.name, ln.relative_error <= 0.05, ln.value,
                    f"target {ln.target:.6g} within 5% of {ln.scale:.4g}")
            for ln in lines if ln.name != "self_interaction"]


def _trajectory_csv(tr) -> str:
    rows = np.column_stack([tr.t, tr.x, tr.theta, tr.V, tr.V0])
    N = tr.x.shape[1]
    header = (["t"] + [f"x_{i + 1}" for i in range(N)]
              + [f"theta_{i + 1}" for i in range(N - 1)] + ["V", "V0"])
    return csv_text(header, rows)


def check_invariance(gamma: float = GAMMA_HALF) -> list:
    out = []
    lp = _half_layer()
    p, sig0 = lp.potential, dyn.zero_stress()
    # single stationary layer
    cfg1 = dyn.ParticleConfig((0.123,), (1,))
    st = initial_data(cfg1, lp, sig0, 0.1)
    tbl = SymbolTable(0.5)
    dt = stable_dt(0.1, 0.5, p, st.w.spacing)
    v0 = st.v()
    for _ in range(100):
        st = step(st, dt, sig0, p, tbl)
    drift = float(np.max(np.abs(st.v() - v0)))
    scheme_tol = max(lp.residual, np.finfo(float).eps)
    out.append(Outcome(14, "single-layer stationarity", drift <= 10 * scheme_tol, drift,
                       f"<= 10 x {scheme_tol:.2g} over 100 steps"))
    # orientation flip and reflection
    sig = dyn.separable_stress(0.3, 0.5, 2.0, 1.3, 0.2)
    worst_flip = worst_refl = 0.0
    for s in (0.3, 0.5, 0.7):
        cfg = dyn.ParticleConfig((0.0, 0.7, 2.1), (1, -1, 1))
        tr, _ = dyn.integrate(cfg, sig, gamma, s, 1.0)
        tf, _ = dyn.integrate(cfg.flipped(), sig.negated(), gamma, s, 1.0)
        trf, _ = dyn.integrate(cfg.reflected(), sig.reflected().negated(), gamma, s, 1.0)
        worst_flip = max(worst_flip, float(np.max(np.abs(tr.x - tf.x))))
        if trf.x.shape == tr.x.shape:
            worst_refl = max(worst_refl, float(np.max(np.abs(tr.x + trf.x[:, ::-1]))))
        else:
            worst_refl = math.inf
    out.append(Outcome(14, "orientation flip", worst_flip <= 1e-10, worst_flip, "<= 1e-10"))
    out.append(Outcome(14, "reflection", worst_refl <= 1e-10, worst_refl, "<= 1e-10"))
    # determinism
    texts = [_trajectory_csv(dyn.integrate(triple_config(), sig0, gamma, 0.5, 1.0)[0])
             for _ in range(2)]
    runs = [run_pde(two_body_config(), lp, sig0, 0.08, 0.005, [(0.005, 0.0)],
                    snapshot_times=[0.005]) for _ in range(2)]
    snaps = [csv_text(["x", "v_eps"], np.column_stack(r.snapshots[0.005])) for r in runs]
    same = texts[0] == texts[1] and snaps[0] == snaps[1]
    out.append(Outcome(14, "determinism", same, float(same), "byte-identical outputs"))
    return out


CHECKS = {
    1: ("two-body collision time", check_two_body),
    2: ("symmetric triple collision", check_triple),
    3: ("three-layer bracket and order", check_bracket),
    4: ("scaling law", check_scaling),
    5: ("layer closed form", check_layer),
    6: ("operator correctness", check_operator),
    7: ("gradient structure", check_gradient),
    8: ("small-gap cone and bound", check_cone),
    9: ("alternating bounds", check_alternating),
    10: ("sharp-interface convergence", check_sharp_limit),
    11: ("collision memory", check_memory),
    12: ("barrier audit", check_barrier),
    13: ("heuristic integrals", check_heuristics),
    14: ("stationarity and invariances", check_invariance),
}

THEOREM_SUITE = (1, 2, 3, 4, 7, 8, 9)


def run_checks(criteria) -> list:
    out = []
    for c in criteria:
        if c not in CHECKS:
            raise KeyError(f"unknown criterion {c}")
        out.extend(CHECKS[c][1]())
    return out
