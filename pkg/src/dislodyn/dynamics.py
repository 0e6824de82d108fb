"""Signed-orientation particle dynamics, collisions and collision-time bounds.

Particle ``i`` sits at ``x_i`` with orientation ``zeta_i`` and moves by

    x_i' = gamma * (sum_{j != i} zeta_i zeta_j (x_i - x_j) / (2s |x_i - x_j|^(1+2s))
                    - zeta_i sigma(t, x_i)).

Like orientations repel, opposite ones attract, and attracting pairs may
collide in finite time.
"""
from __future__ import annotations

import bisect
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import RK45
from scipy.optimize import brentq

log = logging.getLogger(__name__)

DEFAULT_COLLISION_FRACTION = 1e-6
DEFAULT_GAP_CFL = 0.1
DEFAULT_A0_SAFETY = 0.99


# ---------------------------------------------------------------------------
# stress fields


@dataclass(frozen=True)
class StressField:
    """Closed-form exterior stress with analytic bounds.

    ``kind`` is one of ``zero``, ``constant`` or ``separable``.  The separable
    family is ``a (1 + b sin(omega t)) sin(k x + phi)``.
    """

    kind: str = "zero"
    params: dict = field(default_factory=dict)
    alpha: float = 0.75

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "separable"):
            raise ValueError(f"unknown stress kind {self.kind!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("Hoelder exponent must lie in (0, 1)")

    # parameters with defaults
    def _p(self, key, default=0.0) -> float:
        return float(self.params.get(key, default))

    def __call__(self, t, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(x)
        if self.kind == "constant":
            return np.full_like(x, self._p("sigma0"))
        a, b, om, k, ph = (self._p(q) for q in ("a", "b", "omega", "k", "phi"))
        return a * (1.0 + b * np.sin(om * t)) * np.sin(k * x + ph)

    def dx(self, t, x):
        x = np.asarray(x, dtype=float)
        if self.kind != "separable":
            return np.zeros_like(x)
        a, b, om, k, ph = (self._p(q) for q in ("a", "b", "omega", "k", "phi"))
        return a * k * (1.0 + b * np.sin(om * t)) * np.cos(k * x + ph)

    def dt(self, t, x):
        x = np.asarray(x, dtype=float)
        if self.kind != "separable":
            return np.zeros_like(x)
        a, b, om, k, ph = (self._p(q) for q in ("a", "b", "omega", "k", "phi"))
        return a * b * om * np.cos(om * t) * np.sin(k * x + ph)

    def antiderivative(self, t, r):
        """``int_0^r sigma(t, y) dy`` (without the factor gamma)."""
        r = np.asarray(r, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(r)
        if self.kind == "constant":
            return self._p("sigma0") * r
        a, b, om, k, ph = (self._p(q) for q in ("a", "b", "omega", "k", "phi"))
        if k == 0.0:
            return a * (1.0 + b * math.sin(om * t)) * math.sin(ph) * r
        return a * (1.0 + b * math.sin(om * t)) * (math.cos(ph) - np.cos(k * r + ph)) / k

    @property
    def wavenumber(self) -> float:
        return self._p("k") if self.kind == "separable" else 0.0

    @property
    def sup_norm(self) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "constant":
            return abs(self._p("sigma0"))
        return abs(self._p("a")) * (1.0 + abs(self._p("b")))

    @property
    def bound(self) -> float:
        """M bounding sigma, sigma_t, sigma_x and the Hoelder quotient of sigma_x."""
        if self.kind != "separable":
            return self.sup_norm
        a, b, om, k = (abs(self._p(q)) for q in ("a", "b", "omega", "k"))
        amp = a * (1.0 + b)
        # |sin u - sin v| <= min(|u - v|, 2) <= 2^(1-alpha) |u - v|^alpha
        holder = amp * k ** (1.0 + self.alpha) * 2.0 ** (1.0 - self.alpha)
        return max(amp, a * b * om, amp * k, holder)

    @property
    def nonpositive(self) -> bool:
        if self.kind == "zero":
            return True
        if self.kind == "constant":
            return self._p("sigma0") <= 0.0
        return self.sup_norm == 0.0

    @property
    def is_zero(self) -> bool:
        return self.sup_norm == 0.0

    def negated(self) -> "StressField":
        params = dict(self.params)
        if self.kind == "constant":
            params["sigma0"] = -self._p("sigma0")
        elif self.kind == "separable":
            params["a"] = -self._p("a")
        return StressField(self.kind, params, self.alpha)

    def reflected(self) -> "StressField":
        """``sigma(t, -x)``."""
        if self.kind != "separable":
            return self
        # a sin(-kx + phi) = -a sin(kx - phi)
        params = dict(self.params)
        params["a"] = -self._p("a")
        params["phi"] = -self._p("phi")
        return StressField(self.kind, params, self.alpha)

    def check(self, probes: int = 256, seed: int = 0) -> float:
        """Largest sampled ratio of |sigma|, |sigma_t|, |sigma_x| and the
        Hoelder quotient of sigma_x to M (<= 1 when the bound holds)."""
        M = self.bound
        if M == 0.0:
            return 0.0
        rng = np.random.default_rng(seed)
        t = rng.uniform(0.0, 10.0, probes)
        x = rng.uniform(-10.0, 10.0, probes)
        y = x + rng.uniform(1e-3, 1.0, probes)
        vals = [np.abs(self(t, x)), np.abs(self.dt(t, x)), np.abs(self.dx(t, x)),
                np.abs(self.dx(t, x) - self.dx(t, y)) / np.abs(x - y) ** self.alpha]
        return float(max(np.max(v) for v in vals) / M)

    def as_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params), "alpha": self.alpha,
                "bound": self.bound}


def zero_stress() -> StressField:
    return StressField("zero")


def constant_stress(sigma0: float) -> StressField:
    return StressField("constant", {"sigma0": float(sigma0)})


def separable_stress(a: float, b: float = 0.0, omega: float = 0.0, k: float = 1.0,
                     phi: float = 0.0, alpha: float = 0.75) -> StressField:
    return StressField("separable", {"a": a, "b": b, "omega": omega, "k": k, "phi": phi},
                       alpha)


# ---------------------------------------------------------------------------
# configurations and records


@dataclass(frozen=True)
class ParticleConfig:
    positions: tuple
    orientations: tuple

    def __post_init__(self):
        x = tuple(float(v) for v in self.positions)
        z = tuple(int(v) for v in self.orientations)
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "orientations", z)
        if len(x) < 1:
            raise ValueError("need at least one particle")
        if len(x) != len(z):
            raise ValueError("positions and orientations differ in length")
        if any(v not in (-1, 1) for v in z):
            raise ValueError("orientations must be +1 or -1")
        if any(b <= a for a, b in zip(x, x[1:])):
            raise ValueError("positions must be strictly increasing")

    @property
    def N(self) -> int:
        return len(self.positions)

    @property
    def K(self) -> int:
        return sum(1 for z in self.orientations if z < 0)

    @property
    def x0(self) -> np.ndarray:
        return np.array(self.positions)

    @property
    def zeta(self) -> np.ndarray:
        return np.array(self.orientations, dtype=float)

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(self.x0)

    def scaled(self, lam: float) -> "ParticleConfig":
        return ParticleConfig(tuple(lam * v for v in self.positions), self.orientations)

    def flipped(self) -> "ParticleConfig":
        return ParticleConfig(self.positions, tuple(-z for z in self.orientations))

    def reflected(self) -> "ParticleConfig":
        return ParticleConfig(tuple(-v for v in reversed(self.positions)),
                              tuple(reversed(self.orientations)))

    @classmethod
    def from_gaps(cls, gaps, orientations, start: float = 0.0) -> "ParticleConfig":
        return cls(tuple(start + np.concatenate([[0.0], np.cumsum(gaps)])), orientations)


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray  # shape (len(t), N)
    V: np.ndarray
    V0: np.ndarray
    dt_log: np.ndarray
    dense: list = field(default_factory=list, repr=False)

    @property
    def theta(self) -> np.ndarray:
        return np.diff(self.x, axis=1)

    def position(self, t: float) -> np.ndarray:
        """Positions at time ``t`` from the dense output of the covering step."""
        if not self.dense:
            if t == self.t[0]:
                return self.x[0].copy()
            raise ValueError("trajectory has no dense output")
        ends = [d.t for d in self.dense]
        k = bisect.bisect_left(ends, t)
        if t < self.t[0] or k == len(ends):
            raise ValueError(f"t={t} outside the integrated range")
        return self.dense[k](t)


@dataclass
class CollisionReport:
    collided: bool
    classification: str  # pairwise | triple | none-by-horizon | solver-limit
    t_lo: float
    t_hi: float
    T_c: float
    pairs: list
    min_gap_history: np.ndarray
    delta_coll: float
    message: str = ""

    def as_dict(self) -> dict:
        return {
            "collided": self.collided,
            "classification": self.classification,
            "t_lo": self.t_lo,
            "t_hi": self.t_hi,
            "T_c": self.T_c if math.isfinite(self.T_c) else None,
            "pairs": [list(p) for p in self.pairs],
            "delta_coll": self.delta_coll,
            "min_gap_final": float(self.min_gap_history[-1]),
            "message": self.message,
        }


@dataclass
class TheoremCheckResult:
    theorem: str
    hypothesis: bool
    bounds: dict
    measured: float
    margin: float
    passed: bool
    note: str = ""

    def as_dict(self) -> dict:
        def clean(v):
            return v if (not isinstance(v, float) or math.isfinite(v)) else None
        return {"theorem": self.theorem, "hypothesis": self.hypothesis,
                "bounds": {k: clean(v) for k, v in self.bounds.items()},
                "measured": clean(self.measured), "margin": clean(self.margin),
                "passed": self.passed, "note": self.note}


# ---------------------------------------------------------------------------
# right-hand side and potential


def _pair_terms(x: np.ndarray, s: float):
    d = x[:, None] - x[None, :]
    r = np.abs(d)
    np.fill_diagonal(r, 1.0)
    if np.any(r <= 0.0):
        raise ValueError("coincident positions: the system is undefined at a collision")
    return d, r


def velocity_field(t: float, x, cfg: ParticleConfig, sigma: StressField, gamma: float,
                   s: float) -> np.ndarray:
    """Right-hand side of the particle system at positions ``x``."""
    x = np.asarray(x, dtype=float)
    z = cfg.zeta
    return gamma * (_interaction(x, z, s) - z * sigma(t, x))


def _interaction(x: np.ndarray, z: np.ndarray, s: float) -> np.ndarray:
    d, r = _pair_terms(x, s)
    k = np.outer(z, z) * d / (2.0 * s * r ** (1.0 + 2.0 * s))
    np.fill_diagonal(k, 0.0)
    return k.sum(axis=1)


def potential_value(t: float, x, cfg: ParticleConfig, sigma: StressField, gamma: float,
                    s: float) -> dict:
    """Interaction energy ``V0`` and total potential ``V = V0 + sum zeta_i Sigma(t, x_i)``.

    Each unordered pair is counted once, which makes ``-grad V`` equal to the
    velocity field.
    """
    x = np.asarray(x, dtype=float)
    z = cfg.zeta
    _, r = _pair_terms(x, s)
    iu = np.triu_indices(x.size, k=1)
    zz = np.outer(z, z)[iu]
    ri = r[iu]
    if abs(s - 0.5) < 1e-14:
        V0 = -gamma * float(np.sum(zz * np.log(ri)))
    else:
        V0 = gamma / (2.0 * s * (2.0 * s - 1.0)) * float(np.sum(zz * ri ** (1.0 - 2.0 * s)))
    V = V0 + gamma * float(np.sum(z * sigma.antiderivative(t, x)))
    return {"V": V, "V0": V0}


def theta_rhs(x, cfg: ParticleConfig, gamma: float, s: float, sigma: StressField | None = None,
              t: float = 0.0) -> np.ndarray:
    """Gap velocities written directly in gap form.

    The interaction part is the gap system; a stress adds
    ``-gamma (zeta_{i+1} sigma(x_{i+1}) - zeta_i sigma(x_i))``.
    """
    x = np.asarray(x, dtype=float)
    z = cfg.zeta
    N = x.size
    out = np.empty(N - 1)
    for i in range(N - 1):
        acc = 2.0 * z[i] * z[i + 1] / (x[i + 1] - x[i]) ** (2 * s)
        for j in range(i):
            acc += z[i + 1] * z[j] / (x[i + 1] - x[j]) ** (2 * s)
            acc -= z[i] * z[j] / (x[i] - x[j]) ** (2 * s)
        for j in range(i + 2, N):
            acc -= z[i + 1] * z[j] / (x[j] - x[i + 1]) ** (2 * s)
            acc += z[i] * z[j] / (x[j] - x[i]) ** (2 * s)
        out[i] = gamma / (2 * s) * acc
    if sigma is not None and not sigma.is_zero:
        sg = sigma(t, x)
        out -= gamma * (z[1:] * sg[1:] - z[:-1] * sg[:-1])
    return out


# ---------------------------------------------------------------------------
# integration


_DEEP_CONTACT = 1e-4


def _extrapolate(ts: list, gaps: list, s: float, k: int) -> float:
    """Contact time from ``theta^(2s+1)`` linear in t through nodes k-1 and k."""
    p = 2.0 * s + 1.0
    t0, t1 = ts[k - 1], ts[k]
    g0, g1 = gaps[k - 1] ** p, max(gaps[k], 0.0) ** p
    if t1 <= t0 or g0 <= g1:
        return float(t1)
    return float(t1 + g1 * (t1 - t0) / (g0 - g1))


class _Shifted:
    """Dense output of one step, translated back to the lab frame."""

    def __init__(self, interp, shift: float):
        self.interp, self.shift = interp, shift
        self.t_old, self.t = interp.t_old, interp.t

    def __call__(self, t):
        return self.interp(t) + self.shift

    def increment(self, a: float, b: float) -> np.ndarray:
        """``x(t_old + b h) - x(t_old + a h)`` in step-local time.

        Working in the local variable avoids rounding ``t`` itself, which
        matters once steps shrink to a few ulps of the elapsed time.
        """
        q = self.interp
        order = q.Q.shape[1]
        pb = np.cumprod(np.full(order, b))
        pa = np.cumprod(np.full(order, a))
        return q.h * (q.Q @ (pb - pa))


def _classify(gaps: np.ndarray, thresh: float) -> tuple[str, list]:
    """Pairs (or triples) whose gaps are all within ``thresh``."""
    close = [int(i) for i in np.flatnonzero(gaps <= thresh)]
    groups = []
    for i in close:
        if groups and groups[-1][-1] == i:
            groups[-1].append(i + 1)
        else:
            groups.append([i, i + 1])
    kind = "triple" if any(len(g) >= 3 for g in groups) else "pairwise"
    return kind, [tuple(g) for g in groups]


def integrate(cfg: ParticleConfig, sigma: StressField, gamma: float, s: float,
              horizon: float, ode_tol: float = 1e-10, delta_coll: float | None = None,
              gap_cfl: float = DEFAULT_GAP_CFL, event_tol: float | None = None,
              max_steps: int = 1_000_000) -> tuple[Trajectory, CollisionReport]:
    """Integrate up to the first collision or ``horizon``.

    Dormand-Prince 5(4) with relative tolerance ``ode_tol``; each step is also
    capped at ``gap_cfl * min_gap / max_speed``.  A collision is declared when
    the minimal gap reaches ``delta_coll`` (default ``1e-6`` of the initial
    minimal gap).  The crossing is bracketed by bisection on the dense output
    and ``T_c`` is extrapolated with ``theta^(2s+1)`` linear in time.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if ode_tol <= 0:
        raise ValueError("ode_tol must be positive")
    if not 0.0 < s < 1.0:
        raise ValueError("s must lie in (0, 1)")
    x0 = cfg.x0
    N = cfg.N
    gap0 = float(np.min(cfg.gaps)) if N > 1 else 1.0
    scale = max(1.0, float(np.max(np.abs(x0))))
    delta = DEFAULT_COLLISION_FRACTION * gap0 if delta_coll is None else float(delta_coll)
    ev_tol = event_tol if event_tol is not None else 1e-14 * max(horizon, 1.0)

    # work relative to the midpoint of the cloud; this keeps mirror-symmetric
    # data exactly symmetric in floating point
    c = 0.5 * (x0[0] + x0[-1])
    z = cfg.zeta

    def f(t, y):
        return gamma * (_interaction(y, z, s) - z * sigma(t, y + c))

    def min_gap(y):
        return float(np.min(np.diff(y))) if N > 1 else np.inf

    def cap(t, y):
        if N < 2:
            return np.inf
        v = float(np.max(np.abs(f(t, y))))
        return np.inf if v == 0.0 else gap_cfl * min_gap(y) / v

    solver = RK45(f, 0.0, x0 - c, horizon, max_step=min(cap(0.0, x0), horizon),
                  rtol=ode_tol, atol=ode_tol * 1e-3 * min(gap0, scale))

    ts, xs, dts, dense = [0.0], [x0.copy()], [], []
    gaps = [min_gap(x0)]
    status, message = "none-by-horizon", ""
    t_lo = t_hi = tc = float("inf")
    pairs: list = []
    for _ in range(max_steps):
        if solver.status != "running":
            break
        solver.max_step = min(cap(solver.t, solver.y), horizon)
        try:
            msg = solver.step()
        except ValueError as exc:  # coincident positions inside a stage
            status, message = "solver-limit", str(exc)
            break
        if solver.status == "failed":
            status, message = "solver-limit", str(msg)
            if len(ts) >= 2 and gaps[-1] <= _DEEP_CONTACT * gap0:
                # the step needed to go on is below the time resolution, so
                # contact is within a few ulps of t: close the bracket here
                t_lo, t_hi = ts[-2], ts[-1]
                tc = _extrapolate(ts, gaps, s, len(ts) - 1)
                status, pairs = _classify(np.diff(xs[-1]), 10.0 * gaps[-1])
                message = "stopped at the time resolution; " + message
            break
        dense.append(_Shifted(solver.dense_output(), c))
        t_new, y_new = solver.t, solver.y + c
        g = min_gap(y_new)
        if g <= delta:
            interp = dense[-1]
            a, b = solver.t_old, t_new
            while b - a > ev_tol:
                mid = 0.5 * (a + b)
                if mid in (a, b):
                    break
                if min_gap(interp(mid)) > delta:
                    a = mid
                else:
                    b = mid
            ya, yb = interp(a), interp(b)
            for tt, yy in ((a, ya), (b, yb)):
                if tt > ts[-1]:
                    ts.append(tt)
                    xs.append(yy)
                    dts.append(tt - solver.t_old)
                    gaps.append(min_gap(yy))
            t_lo, t_hi = a, b
            tc = _extrapolate(ts, gaps, s, ts.index(a) if a in ts else len(ts) - 2)
            status, pairs = _classify(np.diff(yb), 10.0 * delta)
            break
        ts.append(t_new)
        xs.append(y_new)
        dts.append(solver.step_size)
        gaps.append(g)
    else:
        status, message = "solver-limit", f"step budget {max_steps} exhausted"

    if status == "solver-limit":
        t_lo, t_hi = ts[max(len(ts) - 2, 0)], ts[-1]
        tc = float("nan")

    X = np.array(xs)
    T = np.array(ts)
    pv = [potential_value(tt, xx, cfg, sigma, gamma, s) for tt, xx in zip(T, X)]
    traj = Trajectory(T, X, np.array([p["V"] for p in pv]), np.array([p["V0"] for p in pv]),
                      np.array(dts), dense)
    collided = status in ("pairwise", "triple")
    report = CollisionReport(collided, status, float(t_lo), float(t_hi),
                             float(tc) if collided else float("inf") if status ==
                             "none-by-horizon" else float("nan"),
                             pairs, np.array(gaps), delta, message)
    log.debug("integrate: %s after %d steps, T_c=%s", status, len(dts), report.T_c)
    return traj, report


def theta_trajectories(tr: Trajectory, cfg: ParticleConfig, gamma: float, s: float,
                       sigma: StressField | None = None) -> tuple[np.ndarray, float]:
    """Gap series and the largest relative mismatch between the time derivative
    of the gaps and the gap-form right-hand side.

    The derivative is a central difference across each interior step node,
    taken from the dense interpolants on either side, so the check does not
    reuse the right-hand side of the integrator.
    """
    theta = tr.theta
    worst = 0.0
    for left, right in zip(tr.dense, tr.dense[1:]):
        hl, hr = left.t - left.t_old, right.t - right.t_old
        dh = 1e-5 * min(hl, hr)
        xk = left(left.t)
        rhs = theta_rhs(xk, cfg, gamma, s, sigma, left.t)
        fwd = np.diff(right.increment(0.0, dh / hr))
        bwd = np.diff(left.increment(1.0 - dh / hl, 1.0))
        fd = (fwd + bwd) / (2 * dh)
        err = np.abs(fd - rhs) / np.maximum(np.abs(rhs), 1.0)
        worst = max(worst, float(np.max(err)))
    return theta, worst


# ---------------------------------------------------------------------------
# theorem checks


def max_a0(N: int, s: float) -> float:
    """Supremum of the admissible a0 for the small-gap theorem.

    Root in (0, 1] of ``-1 + (N-2) a^2s + (N-1) a^(2s+1)``.
    """
    if N < 2:
        raise ValueError("N must be >= 2")

    def fun(a):
        return -1.0 + (N - 2) * a ** (2 * s) + (N - 1) * a ** (2 * s + 1)

    if fun(1.0) <= 0.0:
        return 1.0
    return float(brentq(fun, 0.0, 1.0, xtol=1e-12, rtol=4 * np.finfo(float).eps))


def c_s(s: float) -> float:
    """``2^(2s+1) / (2^2s - 1)``."""
    return 2.0 ** (2 * s + 1) / (2.0 ** (2 * s) - 1.0)


def two_layer_time(theta0: float, gamma: float, s: float) -> float:
    """Exact collision time of an opposite pair without stress."""
    return s * theta0 ** (2 * s + 1) / ((2 * s + 1) * gamma)


def cone_ratio(tr: Trajectory, i: int) -> np.ndarray:
    """``theta_i(t) / min_{j != i} theta_j(t)`` along a trajectory."""
    th = tr.theta
    others = np.delete(th, i, axis=1)
    return th[:, i] / np.min(others, axis=1)


def _upper(name, bounds, key, measured, tol, note="", hypothesis=True):
    b = bounds[key]
    margin = b - measured if math.isfinite(measured) else -float("inf")
    return TheoremCheckResult(name, hypothesis, bounds, measured, margin,
                              bool(margin >= -tol * max(abs(b), 1e-300)), note)


def collision_bounds(cfg: ParticleConfig, sigma: StressField, gamma: float, s: float,
                     measured: CollisionReport, a0_safety: float = DEFAULT_A0_SAFETY,
                     rel_tol: float = 1e-6, horizon: float | None = None
                     ) -> list[TheoremCheckResult]:
    """Evaluate every collision-time theorem whose hypotheses hold.

    Upper bounds pass when ``bound - T_c >= -rel_tol * bound``.  A run that
    ended without collision fails an upper bound only if its horizon went
    past the bound.
    """
    N, K = cfg.N, cfg.K
    z = cfg.orientations
    th0 = cfg.gaps
    Tc = measured.T_c if measured.collided else float("inf")
    out: list[TheoremCheckResult] = []

    def upper(name, bounds, key, note=""):
        if not measured.collided and horizon is not None and horizon <= bounds[key]:
            return TheoremCheckResult(name, True, bounds, Tc, float("nan"), True,
                                      "inconclusive: horizon shorter than the bound")
        return _upper(name, bounds, key, Tc, rel_tol, note)

    # two opposite layers
    if N == 2 and K == 1:
        theta0 = float(th0[0])
        M = sigma.sup_norm
        if sigma.nonpositive:
            b = {"upper": two_layer_time(theta0, gamma, s)}
            out.append(upper("two_layer_nonpositive_stress", b, "upper"))
        else:
            out.append(TheoremCheckResult("two_layer_nonpositive_stress", False, {}, Tc,
                                          float("nan"), True, "stress takes positive values"))
        radius = float("inf") if M == 0.0 else (1.0 / (2 * s * M)) ** (1.0 / (2 * s))
        if theta0 < radius:
            denom = 1.0 - 2 * s * theta0 ** (2 * s) * M
            b = {"upper": s * theta0 ** (1 + 2 * s) / (gamma * denom), "radius": radius}
            out.append(upper("two_layer_small_gap", b, "upper",
                             "denominator taken as 1 - 2s theta0^2s |sigma|"))
        else:
            out.append(TheoremCheckResult(
                "two_layer_small_gap", False, {"radius": radius}, Tc, float("nan"), True,
                "smallness violated: a collision is not guaranteed"))

    # three alternating layers
    alternating = N >= 2 and all(z[i] * z[i + 1] == -1 for i in range(N - 1))
    if N == 3 and alternating and sigma.is_zero:
        tau = two_layer_time(float(np.min(th0)), gamma, s)
        C = c_s(s)
        b = {"lower": tau, "upper": C * tau}
        if measured.collided:
            margin = min(Tc - tau, C * tau - Tc)
            ok = margin >= -rel_tol * C * tau
        else:
            margin, ok = float("-inf"), False
        out.append(TheoremCheckResult("three_layer_bracket", True, b, Tc, margin, bool(ok)))
        if th0[0] == th0[1]:
            exact = C * two_layer_time(float(th0[0]), gamma, s)
            err = abs(Tc - exact) / exact if measured.collided else float("inf")
            out.append(TheoremCheckResult(
                "three_layer_triple", True, {"exact": exact}, Tc, -err,
                bool(measured.classification == "triple" and err <= 1e-4),
                f"classification {measured.classification}"))

    # one small gap between opposite layers
    if N >= 2 and K >= 1 and sigma.is_zero:
        a0 = a0_safety * max_a0(N, s)
        for i in range(N - 1):
            if z[i] * z[i + 1] != -1:
                continue
            others = np.delete(th0, i)
            if others.size and th0[i] > a0 * float(np.min(others)):
                continue
            b = {"upper": s * th0[i] ** (2 * s + 1)
                 / ((2 * s + 1) * gamma * (1.0 - (N - 2) * a0 ** (2 * s))), "a0": a0,
                 "index": i}
            out.append(upper("small_gap_cone", b, "upper"))

    # alternating orientations
    if alternating and N >= 2 and sigma.is_zero:
        span = float(cfg.positions[-1] - cfg.positions[0])
        if N % 2:
            b = {"upper": (N - 1) * span ** (2 * s + 1) / ((2 * s + 1) * gamma)}
            name = "alternating_odd"
        else:
            b = {"upper": s * span ** (2 * s + 1) / ((2 * s + 1) * gamma)}
            name = "alternating_even"
        out.append(upper(name, b, "upper"))
    return out


def gradient_mismatch(t: float, x, cfg: ParticleConfig, sigma: StressField, gamma: float,
                      s: float, rel_step: float = 1e-6) -> float:
    """Relative gap between ``-grad V`` (central differences) and the velocity."""
    x = np.asarray(x, dtype=float)
    h = rel_step * max(1.0, float(np.max(np.abs(x))))
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (potential_value(t, x + e, cfg, sigma, gamma, s)["V"]
                - potential_value(t, x - e, cfg, sigma, gamma, s)["V"]) / (2 * h)
    v = velocity_field(t, x, cfg, sigma, gamma, s)
    return float(np.max(np.abs(-g - v)) / max(float(np.max(np.abs(v))), 1e-300))


def random_admissible(rng: np.random.Generator, N: int, min_gap: float = 0.2,
                      max_gap: float = 2.0) -> ParticleConfig:
    """Random ordered positions with gaps in ``[min_gap, max_gap]`` and random signs."""
    gaps = rng.uniform(min_gap, max_gap, N - 1)
    z = tuple(int(v) for v in rng.choice([-1, 1], N))
    return ParticleConfig.from_gaps(gaps, z, start=rng.uniform(-1.0, 1.0))
