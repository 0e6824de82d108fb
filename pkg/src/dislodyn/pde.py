"""The eps-scaled phase-field evolution, its sharp-front limit and barriers.

The field solves

    eps v_t = I_s v - eps^(-2s) W'(v) + sigma(t, x)

from layered initial data.  It is split as ``v = B + w`` where the background
``B(x) = sum_i u(zeta_i (x - x_i0) / eps) - K`` is frozen at ``t = 0``.  Since
``I_s[u((x - a)/eps)] = eps^(-2s) W'(u((x - a)/eps))`` the background never
enters a quadrature; only the remainder ``w`` is evolved, spectrally on a
periodic box that is wide compared with the fronts.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .dynamics import (
    CollisionReport,
    ParticleConfig,
    StressField,
    Trajectory,
    integrate,
    two_layer_time,
    velocity_field,
)
from .fractional_op import GridFunction, SymbolTable, symbol_constant
from .layer import Corrector, LayerProfile
from .potential import PotentialSpec

log = logging.getLogger(__name__)

DEFAULT_CELLS_PER_EPS = 16
DEFAULT_HALFWIDTH_FACTOR = 10.0
DEFAULT_DT_SAFETY = 0.5
# remainder magnitude beyond which a run is declared unstable
_BLOWUP_MARGIN = 2.0
# fraction of the box, at each end, watched for boundary pollution
_EDGE_FRACTION = 0.05


class PdeGridError(ValueError):
    pass


class PdeBlowupError(RuntimeError):
    pass


class BarrierCollisionError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# grid and background


def _next_pow2(n: int) -> int:
    return 1 << max(int(n) - 1, 1).bit_length()


def pde_grid(cfg: ParticleConfig, eps: float, sigma: StressField | None = None,
             halfwidth: float | None = None, cells: int | None = None,
             cells_per_eps: int = DEFAULT_CELLS_PER_EPS) -> tuple[float, int]:
    """Half-width ``D`` and power-of-two cell count for the box ``[-D, D)``.

    ``D`` is at least ``10 (max |x_i0| + 1)``; for a separable stress it is
    enlarged to a whole number of stress periods so that sigma is periodic on
    the box.  The spacing must resolve ``eps`` with ``cells_per_eps`` cells.
    """
    if eps <= 0:
        raise PdeGridError("eps must be positive")
    d_min = DEFAULT_HALFWIDTH_FACTOR * (float(np.max(np.abs(cfg.x0))) + 1.0)
    D = d_min if halfwidth is None else float(halfwidth)
    if D < d_min * (1.0 - 1e-12):
        raise PdeGridError(f"domain half-width {D:g} is below the minimum {d_min:g}")
    k = abs(sigma.wavenumber) if sigma is not None else 0.0
    if k > 0.0:
        half_period = math.pi / k
        D = math.ceil(D / half_period - 1e-9) * half_period
    n_min = 2.0 * D * cells_per_eps / eps
    if cells is None:
        n = _next_pow2(math.ceil(n_min))
    else:
        n = int(cells)
        if n & (n - 1):
            raise PdeGridError(f"cell count {n} is not a power of two")
        if n < n_min * (1.0 - 1e-12):
            raise PdeGridError(f"grid too coarse for eps={eps:g}: {n} cells on "
                               f"[-{D:g}, {D:g}] gives fewer than {cells_per_eps} per eps")
    return D, n


@dataclass
class Background:
    """Layer sum frozen at ``t = 0`` (plus an optional integer shift)."""

    centers: np.ndarray
    zeta: np.ndarray
    eps: float
    K: int
    lp: LayerProfile = field(repr=False)
    offset: int = 0

    def layers(self, x) -> list:
        x = np.asarray(x, dtype=float)
        return [self.lp(z * (x - c) / self.eps) for c, z in zip(self.centers, self.zeta)]

    def __call__(self, x) -> np.ndarray:
        return sum(self.layers(x)) - self.K + self.offset

    def reaction(self, x) -> np.ndarray:
        """``sum_i W'(u_i)``, which equals ``eps^(2s) I_s B``."""
        dW = self.lp.potential.dW
        return sum(dW(u) for u in self.layers(x))


@dataclass
class PdeState:
    """Time, scale and the split field ``v = B + w``.

    ``w`` is a periodic :class:`GridFunction` on ``[-D, D)``.  Background
    samples on that grid are cached in ``b`` and ``b_reaction``.
    """

    t: float
    eps: float
    background: Background
    w: GridFunction
    b: np.ndarray = field(repr=False, default=None)
    b_reaction: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.b is None:
            self.b = self.background(self.w.x)
        if self.b_reaction is None:
            self.b_reaction = self.background.reaction(self.w.x)

    @property
    def x(self) -> np.ndarray:
        return self.w.x

    @property
    def halfwidth(self) -> float:
        return 0.5 * self.w.period

    def v(self, x=None) -> np.ndarray:
        """Reconstructed field on the grid, or at arbitrary points in the box."""
        if x is None:
            return self.b + self.w.samples
        x = np.asarray(x, dtype=float)
        D = self.halfwidth
        if np.any(np.abs(x) > D):
            raise ValueError("evaluation point outside the computational box")
        return self.background(x) + self.w(x)

    @property
    def edge_value(self) -> float:
        """Largest ``|w|`` on the outer parts of the box (pollution monitor)."""
        m = max(1, int(_EDGE_FRACTION * self.w.n))
        return float(max(np.max(np.abs(self.w.samples[:m])),
                         np.max(np.abs(self.w.samples[-m:]))))

    def with_w(self, samples, t: float | None = None) -> "PdeState":
        return PdeState(self.t if t is None else t, self.eps, self.background,
                        self.w.with_samples(samples), self.b, self.b_reaction)

    def shifted(self, m: int) -> "PdeState":
        """The same state with ``v`` replaced by ``v + m``."""
        bg = Background(self.background.centers, self.background.zeta, self.eps,
                        self.background.K, self.background.lp, self.background.offset + m)
        return PdeState(self.t, self.eps, bg, self.w, self.b + m, self.b_reaction)


def initial_data(cfg: ParticleConfig, lp: LayerProfile, sigma: StressField, eps: float,
                 halfwidth: float | None = None, cells: int | None = None,
                 offset: int = 0) -> PdeState:
    """Layered datum ``(eps^(2s)/beta) sigma(0, x) + sum_i u(zeta_i (x - x_i0)/eps) - K``."""
    D, n = pde_grid(cfg, eps, sigma, halfwidth, cells)
    h = 2.0 * D / n
    x = -D + h * np.arange(n)
    beta = lp.potential.beta
    w0 = eps ** (2 * lp.s) / beta * sigma(0.0, x)
    bg = Background(cfg.x0, cfg.zeta, eps, cfg.K, lp, offset)
    return PdeState(0.0, eps, bg, GridFunction(-D, h, w0, periodic=True))


# ---------------------------------------------------------------------------
# time stepping


def stable_dt(eps: float, s: float, p: PotentialSpec, h: float,
              safety: float = DEFAULT_DT_SAFETY) -> float:
    """Step cap ``safety eps^(1+2s) / (c(s) k_max^(2s) eps^(2s) + max|W''|)``.

    ``k_max = pi / h`` is the grid Nyquist wavenumber.  The linear part alone
    would be unconditionally stable; keeping it in the cap ties ``dt`` to the
    fastest resolved relaxation rate, which is what keeps the front speed
    error of the explicit reaction small.
    """
    k_max = math.pi / h
    rate = symbol_constant(s) * (k_max * eps) ** (2 * s) + p.max_abs_d2W()
    return safety * eps ** (1.0 + 2.0 * s) / rate


def step(st: PdeState, dt: float, sigma: StressField, p: PotentialSpec,
         tbl: SymbolTable, dt_cap: float | None = None) -> PdeState:
    """One IMEX Euler step: ``I_s w`` implicit in Fourier space, reaction explicit."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    eps, s = st.eps, tbl.s
    cap = stable_dt(eps, s, p, st.w.spacing) if dt_cap is None else dt_cap
    if dt > cap * (1.0 + 1e-12):
        raise ValueError(f"dt={dt:g} exceeds the stability cap {cap:g}")
    w = st.w.samples
    r = (st.b_reaction - p.dW(st.b + w)) / eps ** (2 * s)
    if not sigma.is_zero:
        r += sigma(st.t, st.x)
    mult = tbl.multipliers(w.size, st.w.period)
    a = dt / eps
    w_hat = np.fft.rfft(w + a * r) / (1.0 - a * mult)
    w_new = np.fft.irfft(w_hat, w.size)
    bound = len(st.background.centers) + _BLOWUP_MARGIN
    if not np.all(np.isfinite(w_new)) or np.max(np.abs(w_new)) > bound:
        raise PdeBlowupError(f"remainder exceeded {bound:g} at t={st.t + dt:g}")
    return st.with_w(w_new, st.t + dt)


@dataclass
class PdeRun:
    """Probe values, snapshots and diagnostics of one run."""

    eps: float
    probes: np.ndarray  # columns t, x, v_eps
    snapshots: dict  # t -> (x, v)
    steps: int
    dt: float
    v_min: float
    v_max: float
    edge_max: float
    final: PdeState = field(repr=False)

    def as_dict(self) -> dict:
        return {"eps": self.eps, "steps": self.steps, "dt": self.dt,
                "v_min": self.v_min, "v_max": self.v_max, "edge_max": self.edge_max,
                "probes": self.probes.tolist(),
                "cells": int(self.final.w.n), "halfwidth": self.final.halfwidth}


def run_pde(cfg: ParticleConfig, lp: LayerProfile, sigma: StressField, eps: float,
            t_end: float, probes=(), snapshot_times=(), dt: float | None = None,
            halfwidth: float | None = None, cells: int | None = None,
            state: PdeState | None = None) -> PdeRun:
    """Integrate to ``t_end`` recording ``v_eps`` at the ``(t, x)`` probes.

    Each requested time is hit exactly by shortening the steps of the last
    interval uniformly.
    """
    p = lp.potential
    tbl = SymbolTable(lp.s)
    st = state if state is not None else initial_data(cfg, lp, sigma, eps, halfwidth, cells)
    cap = stable_dt(eps, lp.s, p, st.w.spacing)
    dt = cap if dt is None else float(dt)
    if dt > cap * (1.0 + 1e-12):
        raise ValueError(f"dt={dt:g} exceeds the stability cap {cap:g}")
    probes = [(float(t), float(x)) for t, x in probes]
    snaps = [float(t) for t in snapshot_times]
    for t in [t for t, _ in probes] + snaps:
        if t < st.t or t > t_end * (1.0 + 1e-12):
            raise ValueError(f"probe time {t:g} outside [{st.t:g}, {t_end:g}]")
    stops = sorted(set([t for t, _ in probes] + snaps + [float(t_end)]))

    rows, shots = [], {}
    v = st.v()
    v_min, v_max, edge = float(v.min()), float(v.max()), st.edge_value
    nsteps = 0
    for t_stop in stops:
        span = t_stop - st.t
        if span > 0:
            m = math.ceil(span / dt * (1.0 - 1e-12))
            h = span / m
            for j in range(m):
                st = step(st, h, sigma, p, tbl, dt_cap=cap)
                v = st.v()
                v_min, v_max = min(v_min, float(v.min())), max(v_max, float(v.max()))
                edge = max(edge, st.edge_value)
            st.t = t_stop  # remove accumulated rounding
            nsteps += m
        xs = [x for t, x in probes if t == t_stop]
        if xs:
            vals = st.v(np.array(xs))
            rows.extend((t_stop, x, float(val)) for x, val in zip(xs, vals))
        if t_stop in snaps:
            shots[t_stop] = (st.x.copy(), st.v())
    log.debug("run_pde eps=%g: %d steps, v in [%g, %g]", eps, nsteps, v_min, v_max)
    return PdeRun(eps, np.array(rows, dtype=float).reshape(-1, 3), shots, nsteps, dt,
                  v_min, v_max, edge, st)


# ---------------------------------------------------------------------------
# sharp-front limit


@dataclass
class SharpLimit:
    """``v_0(t, x) = sum_i H(zeta_i (x - x_i(t))) - K`` before the first collision."""

    cfg: ParticleConfig
    trajectory: Trajectory = field(repr=False)
    report: CollisionReport

    @property
    def T_c(self) -> float:
        return self.report.T_c

    def fronts(self, t: float) -> np.ndarray:
        if self.report.collided and t >= self.report.t_lo:
            raise ValueError(f"t={t:g} is not before the collision time {self.T_c:g}")
        return self.trajectory.position(t)

    def envelope(self, t: float, x) -> tuple[np.ndarray, np.ndarray]:
        """Lower and upper one-sided values; they differ only on a front."""
        x = np.asarray(x, dtype=float)
        xi = self.fronts(t)
        lo = np.full_like(x, -float(self.cfg.K))
        hi = lo.copy()
        for c, z in zip(xi, self.cfg.zeta):
            arg = z * (x - c)
            lo += arg > 0
            hi += arg >= 0
        return lo, hi

    def __call__(self, t: float, x) -> np.ndarray:
        """Value off the fronts (upper envelope on a front)."""
        return self.envelope(t, x)[1]


def sharp_limit(cfg: ParticleConfig, sigma: StressField, gamma: float, s: float,
                horizon: float = 100.0, ode_tol: float = 1e-10) -> SharpLimit:
    tr, rep = integrate(cfg, sigma, gamma, s, horizon, ode_tol=ode_tol)
    if rep.classification == "solver-limit":
        raise RuntimeError(f"particle system failed: {rep.message}")
    return SharpLimit(cfg, tr, rep)


# ---------------------------------------------------------------------------
# collision memory


@dataclass
class MemoryReport:
    T_c: float
    x_c: float
    offset: float
    eps: list
    times: list
    center: np.ndarray  # v_eps(t, x_c), shape (len(eps), len(times))
    left: np.ndarray
    right: np.ndarray
    runs: list = field(repr=False, default_factory=list)

    @property
    def lattice_max(self) -> float:
        return float(np.max(self.center))

    @property
    def per_eps_max(self) -> np.ndarray:
        return np.max(self.center, axis=1)

    @property
    def refinement_nondecreasing(self) -> bool:
        """Per-eps maxima do not decrease as eps decreases."""
        order = np.argsort(self.eps)[::-1]
        m = self.per_eps_max[order]
        return bool(np.all(np.diff(m) >= 0.0))

    @property
    def time_trend_nondecreasing(self) -> bool:
        """``v_eps(t, x_c)`` along the schedule for the smallest eps."""
        row = self.center[int(np.argmin(self.eps))]
        return bool(np.all(np.diff(row) >= 0.0))

    @property
    def off_center_last(self) -> float:
        """Largest off-center value for the smallest eps at the latest time."""
        i = int(np.argmin(self.eps))
        return float(max(abs(self.left[i, -1]), abs(self.right[i, -1])))

    def as_dict(self) -> dict:
        return {"T_c": self.T_c, "x_c": self.x_c, "offset": self.offset,
                "eps": list(self.eps), "times": list(self.times),
                "center": self.center.tolist(), "left": self.left.tolist(),
                "right": self.right.tolist(), "lattice_max": self.lattice_max,
                "per_eps_max": self.per_eps_max.tolist(),
                "refinement_nondecreasing": self.refinement_nondecreasing,
                "time_trend_nondecreasing": self.time_trend_nondecreasing,
                "off_center_last": self.off_center_last}


def collision_memory_probe(cfg: ParticleConfig, lp: LayerProfile, sigma: StressField,
                           gamma: float, eps_list=(0.08, 0.04, 0.02), levels: int = 4,
                           offset_factor: float = 5.0) -> MemoryReport:
    """Tabulate ``v_eps`` at the collision point on an ``(eps, t)`` lattice.

    Times are ``T_c (1 - 2^-k)`` for ``k = 1..levels``; off-center probes sit
    at ``x_c +- offset_factor * theta_0`` with ``theta_0`` the initial gap of
    the colliding pair.
    """
    s = lp.s
    lim = sharp_limit(cfg, sigma, gamma, s)
    rep = lim.report
    if rep.classification != "pairwise":
        raise ValueError(f"expected a pairwise collision, got {rep.classification}")
    i, j = rep.pairs[0][0], rep.pairs[0][-1]
    x_hit = lim.trajectory.x[-1]
    x_c = 0.5 * float(x_hit[i] + x_hit[j])
    d = offset_factor * float(cfg.x0[j] - cfg.x0[i])
    times = [rep.T_c * (1.0 - 2.0 ** -k) for k in range(1, levels + 1)]
    eps_list = [float(e) for e in eps_list]
    shape = (len(eps_list), len(times))
    center, left, right = np.empty(shape), np.empty(shape), np.empty(shape)
    runs = []
    for a, eps in enumerate(eps_list):
        probes = [(t, x) for t in times for x in (x_c - d, x_c, x_c + d)]
        run = run_pde(cfg, lp, sigma, eps, times[-1], probes)
        vals = run.probes[:, 2].reshape(len(times), 3)
        left[a], center[a], right[a] = vals[:, 0], vals[:, 1], vals[:, 2]
        runs.append(run)
    return MemoryReport(rep.T_c, x_c, d, eps_list, times, center, left, right, runs)


# ---------------------------------------------------------------------------
# barriers


@dataclass(frozen=True)
class _OffsetStress:
    """``sigma + c``; only what the particle integrator needs."""

    base: StressField
    c: float

    def __call__(self, t, x):
        return self.base(t, x) + self.c

    def antiderivative(self, t, r):
        return self.base.antiderivative(t, r) + self.c * np.asarray(r, dtype=float)


@dataclass
class BarrierState:
    side: str
    delta: float
    t: float
    eps: float
    x_bar: np.ndarray
    c_bar: np.ndarray
    psi: Corrector | None
    x: np.ndarray
    values: np.ndarray
    trajectory: Trajectory = field(repr=False, default=None)

    def as_dict(self) -> dict:
        return {"side": self.side, "delta": self.delta, "t": self.t, "eps": self.eps,
                "x_bar": self.x_bar.tolist(), "c_bar": self.c_bar.tolist(),
                "min": float(np.min(self.values)), "max": float(np.max(self.values))}


def _sign(side: str) -> int:
    if side not in ("upper", "lower"):
        raise ValueError("side must be 'upper' or 'lower'")
    return 1 if side == "upper" else -1


def perturbed_system(side: str, delta: float, cfg: ParticleConfig, sigma: StressField,
                     gamma: float, s: float, horizon: float,
                     ode_tol: float = 1e-10) -> tuple[ParticleConfig, _OffsetStress, Trajectory]:
    """Integrate the shifted system driving the barrier fronts up to ``horizon``."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    sg = _sign(side)
    try:
        pcfg = ParticleConfig(tuple(cfg.x0 - sg * cfg.zeta * delta), cfg.orientations)
    except ValueError as exc:
        raise BarrierCollisionError(f"delta={delta:g} makes the fronts cross: {exc}") from exc
    pstress = _OffsetStress(sigma, sg * delta)
    tr, rep = integrate(pcfg, pstress, gamma, s, max(horizon, 1e-12), ode_tol=ode_tol)
    if rep.collided or rep.classification == "solver-limit":
        raise BarrierCollisionError(
            f"perturbed system stops at t={rep.t_lo:g} before t={horizon:g}")
    return pcfg, pstress, tr


def _barrier_parts(side, delta, pcfg, pstress, tr, lp, psi, sigma, eps, t, x, gamma):
    s = lp.s
    beta = lp.potential.beta
    sg = _sign(side)
    xb = tr.position(t) if t > 0 else pcfg.x0.copy()
    cb = velocity_field(t, xb, pcfg, pstress, gamma, s)
    sig_bar = (sigma(t, x) + sg * delta) / beta
    v = eps ** (2 * s) * sig_bar - pcfg.K
    parts = []
    for c, z, speed in zip(xb, pcfg.zeta, cb):
        xi = z * (x - c) / eps
        u = lp(xi)
        ps = psi(xi) if psi is not None else np.zeros_like(xi)
        v = v + u - z * eps ** (2 * s) * speed * ps
        parts.append((xi, u, ps, z, speed))
    return v, xb, cb, parts


def build_barrier(side: str, delta: float, cfg: ParticleConfig, lp: LayerProfile,
                  psi: Corrector | None, sigma: StressField, eps: float, t: float,
                  x=None, gamma: float | None = None, _system=None) -> BarrierState:
    """Assemble the upper (or lower) barrier at time ``t`` on the points ``x``.

    ``x`` defaults to the PDE grid for this ``eps``.  ``psi = None`` stands
    for the zero corrector.
    """
    gamma = lp.gamma if gamma is None else gamma
    if x is None:
        D, n = pde_grid(cfg, eps, sigma)
        x = -D + 2.0 * D / n * np.arange(n)
    x = np.asarray(x, dtype=float)
    pcfg, pstress, tr = _system or perturbed_system(side, delta, cfg, sigma, gamma, lp.s, t)
    v, xb, cb, _ = _barrier_parts(side, delta, pcfg, pstress, tr, lp, psi, sigma, eps, t, x, gamma)
    if not np.all(np.isfinite(v)):
        raise FloatingPointError("barrier field is not finite")
    return BarrierState(side, float(delta), float(t), float(eps), xb, cb, psi, x, v, tr)


@dataclass
class BarrierResidual:
    side: str
    t: float
    x: np.ndarray
    values: np.ndarray  # I_eps at x
    mask: np.ndarray  # True away from the fronts

    @property
    def worst(self) -> float:
        """Most adverse sampled value: min for an upper, -max for a lower barrier."""
        v = self.values[self.mask]
        return float(np.min(v)) if self.side == "upper" else float(-np.max(v))


def barrier_residual(side: str, delta: float, cfg: ParticleConfig, lp: LayerProfile,
                     psi: Corrector | None, sigma: StressField, eps: float, t: float,
                     x=None, gamma: float | None = None, dt_fd: float | None = None,
                     exclusion: float = 2.0) -> BarrierResidual:
    """Sample ``I_eps = eps vbar_t + eps^(-2s) (W'(vbar) - eps^(2s) I_s vbar - eps^(2s) sigma)``.

    ``eps^(2s) I_s vbar`` is evaluated exactly from the layer and corrector
    equations; ``vbar_t`` by a centered difference of two assemblies (one
    sided at ``t = 0``).  Points within ``exclusion * eps`` of a front are
    masked out.
    """
    s = lp.s
    gamma = lp.gamma if gamma is None else gamma
    p = lp.potential
    beta = p.beta
    eta = lp.eta
    if x is None:
        D, n = pde_grid(cfg, eps, sigma)
        x = -D + 2.0 * D / n * np.arange(n)
    x = np.asarray(x, dtype=float)
    dt_fd = 1e-6 * max(t, two_layer_time(1.0, gamma, s)) if dt_fd is None else dt_fd
    t_lo, t_hi = max(t - dt_fd, 0.0), t + dt_fd
    system = perturbed_system(side, delta, cfg, sigma, gamma, s, t_hi)
    pcfg, pstress, tr = system
    v, xb, cb, parts = _barrier_parts(side, delta, pcfg, pstress, tr, lp, psi, sigma, eps,
                                      t, x, gamma)
    v_lo = _barrier_parts(side, delta, pcfg, pstress, tr, lp, psi, sigma, eps, t_lo, x, gamma)[0]
    v_hi = _barrier_parts(side, delta, pcfg, pstress, tr, lp, psi, sigma, eps, t_hi, x, gamma)[0]
    v_t = (v_hi - v_lo) / (t_hi - t_lo)

    e2s = eps ** (2 * s)
    sg = _sign(side)
    # eps^(2s) I_s vbar, term by term
    k = abs(sigma.wavenumber)
    if sigma.kind == "separable" and k > 0:
        is_sigma = -SymbolTable(s).c * k ** (2 * s) * sigma(t, x)
    else:
        is_sigma = np.zeros_like(x)
    lap = e2s**2 * is_sigma / beta
    for xi, u, ps, z, speed in parts:
        d2 = p.d2W(u)
        lap = lap + p.dW(u) - z * e2s * speed * (d2 * ps + lp.prime(xi) + eta * (d2 - beta))
    res = eps * v_t + (p.dW(v) - lap - e2s * sigma(t, x)) / e2s
    mask = np.ones_like(x, dtype=bool)
    for c in xb:
        mask &= np.abs(x - c) > exclusion * eps
    log.debug("barrier residual (%s, t=%g): sg=%d", side, t, sg)
    return BarrierResidual(side, float(t), x, res, mask)


# ---------------------------------------------------------------------------
# heuristic integrals


@dataclass
class HeuristicLine:
    name: str
    value: float
    target: float
    scale: float

    @property
    def error(self) -> float:
        return abs(self.value - self.target)

    @property
    def relative_error(self) -> float:
        return self.error / self.scale if self.scale > 0 else (0.0 if self.error == 0 else math.inf)

    def as_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "target": self.target,
                "scale": self.scale, "relative_error": self.relative_error}


def _quad_pieces(f, points, far: float) -> float:
    """Integral over ``[-far, far]`` split at ``points`` and at geometrically
    spaced nodes, so algebraic tails and slow oscillations stay resolved."""
    lo, hi = min(points), max(points)
    nodes = set(points)
    r = 10.0
    while r < far:
        nodes.update((lo - r, hi + r))
        r *= 4.0
    nodes.update((-far, far))
    pts = sorted(v for v in nodes if -far <= v <= far)
    total = 0.0
    # the spline layer is only C^2, so quad cannot certify tight tolerances;
    # its roundoff warnings are expected and far below the accuracy needed
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        for a, b in zip(pts, pts[1:]):
            val, _ = quad(f, a, b, limit=200, epsabs=1e-11, epsrel=1e-9)
            total += val
    return total


def heuristic_integrals(lp: LayerProfile, sigma: StressField, eps: float, x1: float,
                        x2: float, t: float = 0.0, gamma: float | None = None) -> list:
    """The eps-scaled interaction integrals of a layer at ``x1`` and an
    opposite one at ``x2`` (in ``y = (x - x1)/eps``), against their limits.

    ``scale`` is the size a relative error is measured against; for a zero
    limit it is the natural size of the term (``1/gamma`` for the overlap of
    derivatives, ``|x1 - x2|^(-2s)/(2s)`` for the reaction terms).
    """
    if x1 == x2:
        raise ValueError("x1 and x2 must differ")
    s = lp.s
    gamma = lp.gamma if gamma is None else gamma
    dW = lp.potential.dW
    dist = x2 - x1
    r = dist / eps
    e2s = eps ** (-2 * s)

    def u(y):
        return float(lp(np.array([y]))[0])

    def du(y):
        return float(lp.prime(np.array([y]))[0])

    def w2(y):  # W'(u_{eps,2}) with u_{eps,2} = u((x2 - x)/eps)
        return float(dW(np.array([u(r - y)]))[0])

    def wsum(y):
        return float(dW(np.array([u(y) + u(r - y)]))[0])

    pts = sorted({-10.0, 0.0, 10.0, r - 10.0, r, r + 10.0})
    far = 1e6 * max(1.0, abs(r))
    inter = e2s * _quad_pieces(lambda y: w2(y) * du(y), pts, far)
    energy = _quad_pieces(lambda y: du(y) ** 2, pts, far)
    overlap = _quad_pieces(lambda y: du(y) * du(r - y), pts, far)
    both = e2s * _quad_pieces(lambda y: wsum(y) * du(y), pts, far)
    forcing = _quad_pieces(lambda y: float(sigma(t, np.array([x1 + eps * y]))[0]) * du(y),
                           pts, far)

    a = abs(dist)
    pair = -dist / (2 * s * a ** (1 + 2 * s))
    sig1 = float(sigma(t, np.array([x1]))[0])
    return [
        HeuristicLine("interaction", inter, pair, abs(pair)),
        HeuristicLine("energy", energy, 1.0 / gamma, 1.0 / gamma),
        HeuristicLine("overlap", overlap, 0.0, 1.0 / gamma),
        HeuristicLine("forcing", forcing, sig1, abs(sig1) if sig1 else sigma.sup_norm),
        HeuristicLine("self_interaction", both, 0.0, abs(pair)),
    ]
