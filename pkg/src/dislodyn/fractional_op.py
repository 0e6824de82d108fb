"""The nonlocal operator I_s on uniform 1-D grids.

``I_s[f](x) = PV int (f(x+y) - f(x)) / |y|^(1+2s) dy`` with no normalization
constant.  Plane waves are eigenfunctions: ``I_s e_k = -c(s)|k|^(2s) e_k``.

Two backends are provided: a spectral one for periodic samples and a
quadrature one for fields that approach constants (possibly different on the
two sides) with algebraic tails.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.signal import fftconvolve
from scipy.special import gamma, hyp2f1

DEFAULT_PV_CELLS = 8
DEFAULT_TAIL_MISMATCH_TOL = 1e-3


class TailMismatchError(ValueError):
    """Boundary samples disagree with the declared far-field model."""


@dataclass(frozen=True)
class TailModel:
    """Far field ``limit -/+ coefficient * |x - center|^(-exponent)``.

    Right of the grid ``f = right_limit - C (x - center)^-p``; left of it
    ``f = left_limit + C_l (center - x)^-p`` with ``C_l`` equal to
    ``left_coefficient`` when given and to ``C`` otherwise.  ``exponent == 0``
    means the field is exactly constant beyond the grid.
    """

    left_limit: float = 0.0
    right_limit: float = 0.0
    exponent: float = 0.0
    coefficient: float = 0.0
    center: float = 0.0
    left_coefficient: float | None = None

    @property
    def left_coef(self) -> float:
        return self.coefficient if self.left_coefficient is None else self.left_coefficient

    def shifted(self, dx: float) -> "TailModel":
        return TailModel(self.left_limit, self.right_limit, self.exponent,
                         self.coefficient, self.center + dx, self.left_coefficient)

    def right(self, x):
        x = np.asarray(x, dtype=float)
        if self.exponent == 0.0:
            return np.full_like(x, self.right_limit)
        return self.right_limit - self.coefficient * (x - self.center) ** (-self.exponent)

    def left(self, x):
        x = np.asarray(x, dtype=float)
        if self.exponent == 0.0:
            return np.full_like(x, self.left_limit)
        return self.left_limit + self.left_coef * (self.center - x) ** (-self.exponent)


@dataclass
class GridFunction:
    origin: float
    spacing: float
    samples: np.ndarray
    tail: TailModel | None = None
    periodic: bool = False

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")
        if self.samples.ndim != 1 or self.samples.size < 4:
            raise ValueError("need a 1-D array with at least 4 samples")

    @property
    def n(self) -> int:
        return self.samples.size

    @property
    def x(self) -> np.ndarray:
        return self.origin + self.spacing * np.arange(self.n)

    @property
    def left_edge(self) -> float:
        return self.origin

    @property
    def right_edge(self) -> float:
        return self.origin + self.spacing * (self.n - 1)

    @property
    def period(self) -> float:
        return self.spacing * self.n

    def with_samples(self, samples) -> "GridFunction":
        return GridFunction(self.origin, self.spacing, samples, self.tail, self.periodic)

    def __call__(self, x):
        """Evaluate by cubic interpolation inside the grid, tail model outside."""
        x = np.asarray(x, dtype=float)
        if self.periodic:
            return _periodic_interp(self, x)
        out = np.empty_like(x)
        lo, hi = self.left_edge, self.right_edge
        inside = (x >= lo) & (x <= hi)
        out[inside] = _spline(self)(x[inside])
        tail = self.tail or TailModel(self.samples[0], self.samples[-1])
        out[x < lo] = tail.left(x[x < lo])
        out[x > hi] = tail.right(x[x > hi])
        return out

    def derivative(self) -> "GridFunction":
        """Spline derivative on the same grid (tails not carried over)."""
        d = _spline(self).derivative()(self.x)
        return GridFunction(self.origin, self.spacing, d, None, self.periodic)


_SPLINE_ATTR = "_cached_spline"


def _spline(f: GridFunction) -> CubicSpline:
    cs = f.__dict__.get(_SPLINE_ATTR)
    if cs is None or cs[0] is not f.samples:
        cs = (f.samples, CubicSpline(f.x, f.samples))
        f.__dict__[_SPLINE_ATTR] = cs
    return cs[1]


def _periodic_interp(f: GridFunction, x: np.ndarray) -> np.ndarray:
    xs = np.append(f.x, f.origin + f.period)
    ys = np.append(f.samples, f.samples[0])
    cs = CubicSpline(xs, ys, bc_type="periodic")
    return cs(f.origin + np.mod(x - f.origin, f.period))


def symbol_constant(s: float) -> float:
    """``c(s) = 2 int_0^inf (1 - cos t) / t^(1+2s) dt = pi / (Gamma(1+2s) sin(pi s))``."""
    if not 0.0 < s < 1.0:
        raise ValueError(f"s must lie in (0, 1), got {s}")
    return float(np.pi / (gamma(1.0 + 2.0 * s) * np.sin(np.pi * s)))


@dataclass
class SymbolTable:
    s: float
    c: float = field(init=False)
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.c = symbol_constant(self.s)

    def multipliers(self, n: int, period: float) -> np.ndarray:
        """``-c(s)|k|^(2s)`` on the rfft wavenumbers of an n-point grid."""
        key = (n, float(period))
        m = self._cache.get(key)
        if m is None:
            k = 2.0 * np.pi * np.fft.rfftfreq(n, d=period / n)
            m = -self.c * np.abs(k) ** (2.0 * self.s)
            m[0] = 0.0
            m.setflags(write=False)
            self._cache[key] = m
        return m


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def resample_periodic(f: GridFunction, n: int) -> GridFunction:
    """Band-limited (Fourier) resampling of a periodic field to n points."""
    if not f.periodic:
        raise ValueError("resample_periodic needs a periodic field")
    coef = np.fft.rfft(f.samples)
    out = np.zeros(n // 2 + 1, dtype=complex)
    m = min(coef.size, out.size)
    out[:m] = coef[:m]
    samples = np.fft.irfft(out, n) * (n / f.n)
    return GridFunction(f.origin, f.period / n, samples, f.tail, periodic=True)


def apply_periodic(f: GridFunction, tbl: SymbolTable) -> GridFunction:
    if not f.periodic:
        raise ValueError("apply_periodic requires a field flagged periodic")
    if not _is_pow2(f.n):
        raise ValueError("apply_periodic requires a power-of-two sample count; "
                         "use resample_periodic first")
    mult = tbl.multipliers(f.n, f.period)
    out = np.fft.irfft(np.fft.rfft(f.samples) * mult, f.n)
    return f.with_samples(out)


# --- quadrature backend -----------------------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)


def _shifted_moment(k: int, p: int, a: float) -> float:
    """``int_k^{k+2} (tau - k)^p tau^a dtau`` by binomial expansion (k is small)."""
    total = 0.0
    for j in range(p + 1):
        coef = float(math.comb(p, j)) * (-k) ** (p - j)
        e = a + j + 1
        total += coef * ((k + 2.0) ** e - float(k) ** e) / e
    return total


@lru_cache(maxsize=32)
def _second_difference_weights(s: float, h: float, m: int, K: int) -> np.ndarray:
    """Weights w[k], k = 0..K, with int_0^{Kh} g(y) y^(-1-2s) dy ~ sum w[k] g(kh).

    ``g(y) = f(x+y) + f(x-y) - 2 f(x)``.  On ``[0, m h]`` the smooth quotient
    ``q = g / y^2`` is interpolated against ``y^(1-2s)`` (``q(0)`` by even
    extrapolation); beyond, ``g`` itself is interpolated against
    ``y^(-1-2s)``.  Both use quadratics on cell pairs.
    """
    a = 1.0 - 2.0 * s
    w = np.zeros(K + 1)
    # near zone, closed-form moments in tau = y / h
    A = np.zeros(m + 1)
    for k in range(0, m, 2):
        # moments of (tau - k)^p tau^a on [k, k+2]
        mom = [_shifted_moment(k, p, a) for p in range(3)]
        # Lagrange basis on nodes 0, 1, 2 in r = tau - k
        A[k] += (mom[2] - 3 * mom[1] + 2 * mom[0]) / 2.0
        A[k + 1] += -(mom[2] - 2 * mom[1])
        A[k + 2] += (mom[2] - mom[1]) / 2.0
    A *= h ** (a + 1)
    # q0 = (4 q1 - q2) / 3
    A[1] += 4.0 * A[0] / 3.0
    A[2] -= A[0] / 3.0
    ks = np.arange(1, m + 1)
    w[1:m + 1] += A[1:] / (ks * h) ** 2
    # far zone, Gauss-Legendre moments of the smooth kernel
    b = -1.0 - 2.0 * s
    j = m
    while j < K:
        if j + 2 <= K:
            tau = 1.0 + _GL_X  # in [0, 2]
            y = (j + tau) * h
            ker = _GL_W * y**b * h
            L0 = (tau - 1.0) * (tau - 2.0) / 2.0
            L1 = -tau * (tau - 2.0)
            L2 = tau * (tau - 1.0) / 2.0
            w[j] += ker @ L0
            w[j + 1] += ker @ L1
            w[j + 2] += ker @ L2
            j += 2
        else:
            tau = 0.5 * (1.0 + _GL_X)
            y = (j + tau) * h
            ker = 0.5 * _GL_W * y**b * h
            w[j] += ker @ (1.0 - tau)
            w[j + 1] += ker @ tau
            j += 1
    w.setflags(write=False)
    return w


def _tail_integral(Y: float, b: np.ndarray, p: float, s: float) -> np.ndarray:
    """``int_Y^inf (y + b)^(-p) y^(-1-2s) dy`` for ``|b| < Y``."""
    q = p + 2.0 * s
    return Y ** (-q) / q * hyp2f1(p, q, q + 1.0, -b / Y)


def check_tail(f: GridFunction, tol: float) -> float:
    """Largest disagreement between edge samples and the tail model."""
    t = f.tail
    if t is None:
        return 0.0
    left = abs(f.samples[0] - float(t.left(np.array([f.left_edge]))[0]))
    right = abs(f.samples[-1] - float(t.right(np.array([f.right_edge]))[0]))
    mismatch = max(left, right)
    if mismatch > tol:
        raise TailMismatchError(
            f"tail model disagrees with edge samples by {mismatch:.3e} > {tol:.1e}; "
            "the grid truncates the field too aggressively")
    return mismatch


def apply_decaying(f: GridFunction, tbl: SymbolTable, pv_radius: float | None = None,
                   tail_mismatch_tol: float = DEFAULT_TAIL_MISMATCH_TOL) -> GridFunction:
    """Quadrature realization of I_s for a field with a far-field model.

    The symmetric second difference removes the principal value for
    ``|y| < pv_radius``; the rest of the grid is integrated directly, and the
    part of the line beyond the (padded) grid is integrated in closed form
    from the tail model.
    """
    s, h, n = tbl.s, f.spacing, f.n
    tail = f.tail or TailModel(f.samples[0], f.samples[-1])
    if tail.exponent != 0.0 and tail.left_limit != tail.right_limit \
            and tail.exponent <= 2.0 * s - 1.0:
        raise ValueError("tail exponent too small for an integrable far field")
    if not (f.left_edge < tail.center < f.right_edge) and tail.exponent != 0.0:
        raise ValueError("tail center must lie inside the grid")
    m = DEFAULT_PV_CELLS if pv_radius is None else int(round(pv_radius / h))
    if m < 2:
        raise ValueError("pv_radius must be at least 2 grid cells")
    m += m % 2
    check_tail(f, tail_mismatch_tol)

    E = n + 2 * m
    E += (E - m) % 2
    K = E
    x = f.x
    xl = f.left_edge - h * np.arange(E, 0, -1)
    xr = f.right_edge + h * np.arange(1, E + 1)
    # I_s ignores constants; removing one first keeps the cancellation in
    # conv - 2 wsum f from amplifying roundoff
    ref = 0.5 * (tail.left_limit + tail.right_limit)
    F = np.concatenate([tail.left(xl), f.samples, tail.right(xr)]) - ref

    w = _second_difference_weights(float(s), float(h), m, K)
    kernel = np.concatenate([w[:0:-1], [0.0], w[1:]])
    conv = fftconvolve(F, kernel, mode="same")[E:E + n]
    Y = K * h
    wsum = float(np.sum(w[1:]))
    out = conv - 2.0 * wsum * (f.samples - ref)

    # beyond |y| = Y: limit terms and algebraic corrections
    base = Y ** (-2.0 * s) / (2.0 * s)
    out += (tail.right_limit - f.samples) * base + (tail.left_limit - f.samples) * base
    if tail.exponent != 0.0:
        p = tail.exponent
        if tail.coefficient != 0.0:
            out -= tail.coefficient * _tail_integral(Y, x - tail.center, p, s)
        if tail.left_coef != 0.0:
            out += tail.left_coef * _tail_integral(Y, tail.center - x, p, s)
    return f.with_samples(out)


def apply(f: GridFunction, tbl: SymbolTable, **kw) -> GridFunction:
    """Dispatch on the periodic flag."""
    return apply_periodic(f, tbl) if f.periodic else apply_decaying(f, tbl, **kw)
