"""Stationary layer ``I_s u = W'(u)`` and the corrector of its linearization.

Both problems are solved by preconditioned pseudo-time relaxation on
``[-L, L]`` with the far field supplied by the algebraic asymptotics
``u ~ H(x) - sign(x) |x|^(-2s) / (2 s W''(0))``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .fractional_op import GridFunction, SymbolTable, TailModel, apply_decaying
from .potential import PotentialSpec

log = logging.getLogger(__name__)

# the clamp is an asymptotic model, so edge disagreement is expected
_CLAMP_MISMATCH_TOL = 0.25


class LayerSolveError(RuntimeError):
    pass


@dataclass
class LayerProfile:
    u: GridFunction
    s: float
    potential: PotentialSpec
    gamma: float = float("nan")
    beta: float = float("nan")
    eta: float = float("nan")
    residual: float = float("nan")
    iterations: int = 0
    info: dict = field(default_factory=dict)

    @property
    def L(self) -> float:
        return 0.5 * (self.u.right_edge - self.u.left_edge)

    @property
    def x(self) -> np.ndarray:
        return self.u.x

    def __call__(self, x):
        return self.u(x)

    def prime(self, x):
        """u'(x): spline derivative on the grid, tail derivative outside."""
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        lo, hi = self.u.left_edge, self.u.right_edge
        inside = (x >= lo) & (x <= hi)
        out[inside] = _spline_of(self.u).derivative()(x[inside])
        t = self.u.tail
        out[x > hi] = t.coefficient * t.exponent * (x[x > hi] - t.center) ** (-t.exponent - 1.0)
        out[x < lo] = t.left_coef * t.exponent * (t.center - x[x < lo]) ** (-t.exponent - 1.0)
        return out

    def as_dict(self) -> dict:
        return {
            "s": self.s,
            "L": self.L,
            "h": self.u.spacing,
            "origin": self.u.origin,
            "samples": self.u.samples.tolist(),
            "tail": {
                "exponent": self.u.tail.exponent,
                "coefficient": self.u.tail.coefficient,
                "left_coefficient": self.u.tail.left_coef,
                "center": self.u.tail.center,
            },
            "gamma": self.gamma,
            "beta": self.beta,
            "eta": self.eta,
            "residual": self.residual,
            "iterations": self.iterations,
            **self.info,
        }


def _spline_of(f: GridFunction) -> CubicSpline:
    from .fractional_op import _spline
    return _spline(f)


def _layer_tail(s: float, beta: float, center: float = 0.0) -> TailModel:
    return TailModel(0.0, 1.0, 2.0 * s, 1.0 / (2.0 * s * beta), center)


class _Preconditioner:
    """Applies ``(c|k|^2s + beta)^-1`` on a zero-padded periodic copy."""

    def __init__(self, n: int, h: float, tbl: SymbolTable, shift: float):
        self.n = n
        self.m = 1 << int(np.ceil(np.log2(2 * n)))
        k = 2.0 * np.pi * np.fft.rfftfreq(self.m, d=h)
        self.inv = 1.0 / (tbl.c * k ** (2.0 * tbl.s) + shift)

    def __call__(self, r: np.ndarray) -> np.ndarray:
        pad = np.zeros(self.m)
        pad[:self.n] = r
        return np.fft.irfft(np.fft.rfft(pad) * self.inv, self.m)[:self.n]


def _interior(x: np.ndarray, L: float) -> np.ndarray:
    return np.abs(x) <= 0.75 * L


def _recenter(u: GridFunction) -> tuple[GridFunction, float]:
    """Translate so that u(0) = 1/2, moving the tail model along."""
    x, y = u.x, u.samples
    j = int(np.searchsorted(y, 0.5))
    j = min(max(j, 1), y.size - 1)
    # monotone (linear) bracket, refined by the cubic interpolant
    x0 = x[j - 1] + (0.5 - y[j - 1]) * (x[j] - x[j - 1]) / (y[j] - y[j - 1])
    cs = _spline_of(u)
    for _ in range(3):
        x0 -= (cs(x0) - 0.5) / cs.derivative()(x0)
    shifted = u(x + x0)
    return GridFunction(u.origin, u.spacing, shifted, u.tail.shifted(-x0)), float(x0)


def _refit_tail(u: GridFunction) -> GridFunction:
    """Match the tail coefficient to the edge samples.

    For small s the next term of the far-field expansion is still sizeable at
    the grid edge, so the leading coefficient alone would leave a jump there.
    """
    t = u.tail
    y = u.samples
    right = (t.right_limit - y[-1]) * (u.right_edge - t.center) ** t.exponent
    left = (y[0] - t.left_limit) * (t.center - u.left_edge) ** t.exponent
    tail = TailModel(t.left_limit, t.right_limit, t.exponent, right, t.center, left)
    return GridFunction(u.origin, u.spacing, y, tail)


def initial_profile(x, s: float, beta: float) -> np.ndarray:
    """Monotone 0 -> 1 profile with u(0) = 1/2 and the exact far-field law.

    ``1/2 + sign(x) (1/2 - C / (|x|^2s + 2C))`` with ``C = 1/(2 s beta)``, so
    that it joins the clamp without a jump.
    """
    x = np.asarray(x, dtype=float)
    C = 1.0 / (2.0 * s * beta)
    return 0.5 + np.sign(x) * (0.5 - C / (np.abs(x) ** (2.0 * s) + 2.0 * C))


def solve_layer(p: PotentialSpec, s: float, L: float = 40.0, h: float = 0.05,
                tol: float = 1e-8, max_iter: int = 20000, step: float = 0.9,
                shift: float = 0.0, pv_radius: float | None = None) -> LayerProfile:
    """Relax ``u_t = I_s u - W'(u)`` to the monotone layer.

    The initializer is :func:`initial_profile` centred at ``shift``.  Each sweep applies a
    spectral preconditioner to the residual and re-translates the profile so
    that ``u(0) = 1/2``; the far-field model is translated with it.
    """
    if L < 20:
        raise ValueError("L must be >= 20")
    if h > L / 256:
        raise ValueError("h must be <= L/256")
    if tol <= 0:
        raise ValueError("tol must be positive")
    beta = p.beta
    tbl = SymbolTable(s)
    n = int(round(2 * L / h)) + 1
    x = -L + h * np.arange(n)
    u = GridFunction(x[0], h, initial_profile(x - shift, s, beta), _layer_tail(s, beta, shift))
    # match the clamp to the edges before translating, so no jump is carried inside
    u, _ = _recenter(_refit_tail(u))
    u = _refit_tail(u)
    prec = _Preconditioner(n, h, tbl, beta)
    interior = _interior(x, L)

    res = np.inf
    for it in range(1, max_iter + 1):
        r = apply_decaying(u, tbl, pv_radius, _CLAMP_MISMATCH_TOL).samples - p.dW(u.samples)
        res = float(np.max(np.abs(r[interior])))
        if res <= tol:
            break
        du = prec(r)
        tau = step
        new = u.samples + tau * du
        while np.any(np.diff(new) <= 0.0):
            # backtrack; a persistent failure means the flow itself is unstable
            tau *= 0.5
            if tau < 1e-3 * step:
                raise LayerSolveError(f"monotonicity lost at sweep {it}; reduce the step")
            new = u.samples + tau * du
        u, _ = _recenter(u.with_samples(new))
        u = _refit_tail(u)
    else:
        raise LayerSolveError(
            f"layer relaxation did not reach tol={tol:g} in {max_iter} sweeps "
            f"(residual {res:.3e}); enlarge L or refine h")
    log.debug("layer converged in %d sweeps, residual %.3e", it, res)

    lp = LayerProfile(u, s, p, residual=res, iterations=it)
    c_model = 1.0 / (2.0 * s * beta)
    for coef in (u.tail.coefficient, u.tail.left_coef):
        if abs(coef / c_model - 1.0) > _CLAMP_MISMATCH_TOL:
            raise LayerSolveError(
                f"domain too small: edge coefficient {coef:.4g} is far from "
                f"the far-field value {c_model:.4g}")
    consts = layer_constants(lp)
    lp.gamma, lp.beta, lp.eta = consts["gamma"], consts["beta"], consts["eta"]
    return lp


def _trapz_with_tails(values: np.ndarray, h: float, left_tail: float, right_tail: float) -> float:
    return float(h * (np.sum(values) - 0.5 * (values[0] + values[-1])) + left_tail + right_tail)


def layer_constants(lp: LayerProfile) -> dict:
    """gamma = 1 / int (u')^2, beta = W''(0), eta = 1 / (gamma beta)."""
    u = lp.u
    du = lp.prime(u.x)
    t = u.tail
    q = 2.0 * t.exponent + 1.0
    right = (t.coefficient * t.exponent) ** 2 * (u.right_edge - t.center) ** (-q) / q
    left = (t.left_coef * t.exponent) ** 2 * (t.center - u.left_edge) ** (-q) / q
    energy = _trapz_with_tails(du**2, u.spacing, left, right)
    gamma = 1.0 / energy
    beta = lp.potential.beta
    return {"gamma": gamma, "beta": beta, "eta": 1.0 / (gamma * beta)}


@dataclass
class TailReport:
    kappa_fit: float
    kappa_exceeds_2s: bool
    leading_exponent: float
    derivative_exponent: float
    saturated: bool


def _loglog_slope(x: np.ndarray, y: np.ndarray) -> float:
    A = np.vstack([np.log(x), np.ones_like(x)]).T
    slope, _ = np.linalg.lstsq(A, np.log(y), rcond=None)[0]
    return float(-slope)


def check_tail(lp: LayerProfile, floor: float = 1e-13) -> TailReport:
    """Fit decay exponents of ``|u - H|``, of the far-field remainder and of u'.

    The remainder ``|u - H + sign(x)|x|^-2s / (2 s beta)|`` is fitted on
    ``L/2 <= |x| <= 0.9 L``.  If it sinks below ``floor`` anywhere in the window the
    fit is meaningless and the report is flagged saturated.
    """
    s, beta = lp.s, lp.potential.beta
    x = lp.x
    L = lp.L
    # the outermost cells are pinned to the model by the clamp
    win = (np.abs(x) >= 0.5 * L) & (np.abs(x) <= 0.9 * L)
    xw = x[win]
    model = np.heaviside(xw, 0.5) - np.sign(xw) * np.abs(xw) ** (-2 * s) / (2 * s * beta)
    rem = np.abs(lp.u.samples[win] - model)
    saturated = bool(np.any(rem <= floor))
    kappa = float("inf") if saturated else _loglog_slope(np.abs(xw), rem)
    lead = _loglog_slope(np.abs(xw), np.abs(lp.u.samples[win] - np.heaviside(xw, 0.5)))
    du = np.abs(lp.prime(xw))
    d_exp = _loglog_slope(np.abs(xw), du)
    return TailReport(kappa, bool(kappa > 2 * s), lead, d_exp, saturated)


@dataclass
class Corrector:
    psi: GridFunction
    residual: float
    iterations: int

    def __call__(self, x):
        return self.psi(x)

    @property
    def edge_value(self) -> float:
        """Largest of ``|psi(-L)|`` and ``|psi(L)|``."""
        return float(max(abs(self.psi.samples[0]), abs(self.psi.samples[-1])))

    def prime(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        inside = (x >= self.psi.left_edge) & (x <= self.psi.right_edge)
        out[inside] = _spline_of(self.psi).derivative()(x[inside])
        return out


class CorrectorSolveError(RuntimeError):
    pass


def corrector_rhs(lp: LayerProfile, x) -> np.ndarray:
    W2 = lp.potential.d2W
    return lp.prime(x) + lp.eta * (W2(lp(x)) - lp.potential.beta)


def corrector_residual(lp: LayerProfile, psi: GridFunction, tbl: SymbolTable | None = None,
                       pv_radius: float | None = None) -> np.ndarray:
    tbl = tbl or SymbolTable(lp.s)
    u = lp(psi.x)
    Ipsi = apply_decaying(psi, tbl, pv_radius, tail_mismatch_tol=np.inf).samples
    return Ipsi - lp.potential.d2W(u) * psi.samples - corrector_rhs(lp, psi.x)


def solve_corrector(lp: LayerProfile, p: PotentialSpec | None = None, tol: float = 1e-6,
                    max_iter: int = 50000, step: float = 0.9,
                    pv_radius: float | None = None) -> Corrector:
    """Solve ``I_s psi - W''(u) psi = u' + eta (W''(u) - W''(0))``, psi -> 0.

    The linearized operator annihilates u'; that direction is projected out
    of every sweep, which fixes the normalization ``<psi, u'> = 0``.
    """
    if p is not None and p is not lp.potential:
        lp = LayerProfile(lp.u, lp.s, p, lp.gamma, lp.beta, lp.eta, lp.residual, lp.iterations)
    tbl = SymbolTable(lp.s)
    x, h = lp.x, lp.u.spacing
    n = x.size
    du = lp.prime(x)
    du_norm = float(du @ du)
    prec = _Preconditioner(n, h, tbl, lp.potential.beta)
    interior = _interior(x, lp.L)
    W2u = lp.potential.d2W(lp(x))
    rhs = corrector_rhs(lp, x)

    # psi ~ -rhs / beta far out; W'''(0) = 0 removes the |x|^-2s part of rhs
    s = lp.s
    flat = abs(float(lp.potential.d3W(np.array([0.0]))[0])) < 1e-12
    p_tail = min(1.0 + 2.0 * s, 4.0 * s) if flat else 2.0 * s
    psi = GridFunction(x[0], h, np.zeros(n),
                       TailModel(0.0, 0.0, p_tail, 0.0, lp.u.tail.center))
    res, checkpoint = np.inf, np.inf
    for it in range(1, max_iter + 1):
        Ipsi = apply_decaying(psi, tbl, pv_radius, tail_mismatch_tol=np.inf).samples
        r = Ipsi - W2u * psi.samples - rhs
        res = float(np.max(np.abs(r[interior])))
        if res <= tol:
            break
        if it % 100 == 0:
            if res > 0.99 * checkpoint:
                # a fixed point with nonzero residual: rhs is not orthogonal to u'
                # on the truncated line
                defect = float(rhs @ du) / du_norm
                raise CorrectorSolveError(
                    f"corrector relaxation stalled at residual {res:.3e} after {it} sweeps; "
                    f"solvability defect <rhs, u'>/|u'|^2 = {defect:.3e}, enlarge L")
            checkpoint = res
        new = psi.samples + step * prec(r)
        new -= (new @ du) / du_norm * du
        psi = _refit_tail(psi.with_samples(new))
    else:
        raise CorrectorSolveError(
            f"corrector relaxation stalled at residual {res:.3e} after {max_iter} sweeps")
    return Corrector(psi, res, it)
