"""Periodic multi-well potentials W and their validation.

A potential is admissible when it is 1-periodic, vanishes exactly on the
integers, is strictly positive elsewhere and has a nondegenerate well,
``W''(0) > 0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

Evaluator = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PotentialSpec:
    """Immutable bundle of W and its first three derivatives."""

    W: Evaluator
    dW: Evaluator
    d2W: Evaluator
    d3W: Evaluator
    kind: str
    params: dict = field(default_factory=dict)

    @property
    def beta(self) -> float:
        """Curvature of the well at zero, ``W''(0)``."""
        return float(self.d2W(np.array([0.0]))[0])

    def max_abs_d2W(self, samples: int = 2048) -> float:
        v = np.linspace(0.0, 1.0, samples, endpoint=False)
        return float(np.max(np.abs(self.d2W(v))))


@dataclass
class CheckLine:
    name: str
    residual: float
    passed: bool


@dataclass
class ValidationReport:
    checks: list[CheckLine]
    tol: float
    holder_defect: float | None = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "tol": self.tol,
            "holder_defect": self.holder_defect,
            "checks": [
                {"name": c.name, "residual": c.residual, "passed": c.passed}
                for c in self.checks
            ],
        }


class MalformedPotentialError(ValueError):
    """Raised when an evaluator returns non-finite values."""


def make_cosine_potential() -> PotentialSpec:
    """``W(v) = (1 - cos 2 pi v) / (4 pi)``.

    With the unnormalized kernel this potential makes the s = 1/2 layer
    exactly ``1/2 + arctan(x)/pi``.
    """
    two_pi = 2.0 * np.pi

    def W(v):
        return (1.0 - np.cos(two_pi * np.asarray(v, dtype=float))) / (4.0 * np.pi)

    def dW(v):
        return 0.5 * np.sin(two_pi * np.asarray(v, dtype=float))

    def d2W(v):
        return np.pi * np.cos(two_pi * np.asarray(v, dtype=float))

    def d3W(v):
        return -2.0 * np.pi**2 * np.sin(two_pi * np.asarray(v, dtype=float))

    return PotentialSpec(W, dW, d2W, d3W, kind="cosine", params={})


def make_spline_potential(v_knots, w_knots) -> PotentialSpec:
    """Periodic cubic spline through ``(v, W(v))`` knots on one period.

    The knots must cover ``[0, 1)``; the value at 1 is appended from the value
    at 0 so that the spline closes periodically.  Derivatives are those of the
    interpolant.
    """
    v = np.asarray(v_knots, dtype=float)
    w = np.asarray(w_knots, dtype=float)
    if v.ndim != 1 or v.shape != w.shape or v.size < 4:
        raise MalformedPotentialError("spline potential needs >= 4 matching knots")
    order = np.argsort(v)
    v, w = v[order], w[order]
    if v[0] != 0.0:
        raise MalformedPotentialError("first spline knot must be at v = 0")
    if v[-1] >= 1.0:
        v, w = v[:-1], w[:-1]
    v = np.append(v, 1.0)
    w = np.append(w, w[0])
    cs = CubicSpline(v, w, bc_type="periodic")
    derivs = [cs.derivative(k) for k in range(4)]

    def wrap(f):
        return lambda x: f(np.mod(np.asarray(x, dtype=float), 1.0))

    return PotentialSpec(
        wrap(cs), wrap(derivs[1]), wrap(derivs[2]), wrap(derivs[3]),
        kind="spline", params={"knots": int(v.size - 1)},
    )


def load_spline_potential(path: str | Path) -> PotentialSpec:
    """Read a two-column CSV ``v,W(v)`` (header optional) into a spline potential."""
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        try:
            rows.append((float(parts[0]), float(parts[1])))
        except (ValueError, IndexError):
            if rows:
                raise MalformedPotentialError(f"bad row in {path}: {line!r}")
            continue  # header
    if not rows:
        raise MalformedPotentialError(f"no numeric rows in {path}")
    arr = np.array(rows)
    return make_spline_potential(arr[:, 0], arr[:, 1])


def _finite(name: str, values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise MalformedPotentialError(f"{name} returned non-finite values")
    return values


def _fd_residual(f: Evaluator, df: Evaluator, v: np.ndarray, h: float) -> float:
    # fourth-order central difference, scaled by the derivative magnitude
    fd = (-f(v + 2 * h) + 8 * f(v + h) - 8 * f(v - h) + f(v - 2 * h)) / (12 * h)
    exact = df(v)
    scale = max(1.0, float(np.max(np.abs(exact))))
    return float(np.max(np.abs(fd - exact)) / scale)


def validate_potential(p: PotentialSpec, tol: float = 1e-10, sample_count: int = 1024,
                       fd_tol: float | None = None) -> ValidationReport:
    """Check every structural hypothesis on a deterministic sample.

    Samples are equispaced on ``[0, 1)`` plus the integers -3..3.  Derivative
    cross-validation uses a fourth-order difference, whose truncation error is
    far above 1e-10, so it has its own tolerance ``fd_tol`` (default
    ``max(tol, 1e-6)``).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if sample_count < 64:
        raise ValueError("sample_count must be >= 64")
    fd_tol = max(tol, 1e-6) if fd_tol is None else fd_tol

    v = np.linspace(0.0, 1.0, sample_count, endpoint=False)
    ints = np.arange(-3.0, 4.0)
    w = _finite("W", p.W(v))
    w_shift = _finite("W", p.W(v + 1.0))
    w_int = _finite("W", p.W(ints))
    dw = _finite("W'", p.dW(v))
    dw_shift = _finite("W'", p.dW(v + 1.0))
    d2w0 = float(_finite("W''", p.d2W(np.array([0.0])))[0])
    _finite("W'''", p.d3W(v))

    checks = []
    per = float(np.max(np.abs(w_shift - w)))
    checks.append(CheckLine("periodicity", per, per <= tol))
    per_d = float(np.max(np.abs(dw_shift - dw)))
    checks.append(CheckLine("periodicity_derivative", per_d, per_d <= tol))
    zero = float(np.max(np.abs(w_int)))
    checks.append(CheckLine("zero_on_integers", zero, zero <= tol))
    interior = v[v > 0.0]
    w_min = float(np.min(p.W(interior)))
    # residual = how far below zero (or at zero) the minimum sits
    checks.append(CheckLine("positive_off_integers", max(0.0, -w_min),
                            w_min > 0.0))
    checks.append(CheckLine("nondegenerate_well", max(0.0, -d2w0), d2w0 > 0.0))

    h, v_fd = 1e-3, v
    knots = int(p.params.get("knots", 0)) if p.kind == "spline" else 0
    if knots:
        # keep each stencil inside one polynomial piece of the spline
        v_fd = (np.arange(knots) + 0.5) / knots
        h = 0.2 / knots
    for name, f, df in (("dW_matches_W", p.W, p.dW),
                        ("d2W_matches_dW", p.dW, p.d2W)):
        r = _fd_residual(f, df, v_fd, h)
        checks.append(CheckLine(name, r, r <= fd_tol))

    report = ValidationReport(checks, tol)
    if p.kind == "spline":
        # W''' of a cubic spline is piecewise constant: record its largest jump
        if knots:
            centers = (np.arange(knots) + 0.5) / knots
            d3 = p.d3W(centers)
            report.holder_defect = float(np.max(np.abs(np.diff(np.append(d3, d3[0])))))
    return report
