"""Command line: config ingestion, experiment dispatch and report emission.

Configs are TOML files.  Nested tables are flattened to dotted keys
(``[dyn] s = 0.5`` is ``dyn.s``), checked against :data:`SCHEMA` and unknown
keys are rejected.

Exit codes: 0 success, 1 a theorem check or acceptance probe failed,
2 the config could not be parsed, 3 a value failed validation,
4 a numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from . import dynamics as dyn
from .fractional_op import TailMismatchError
from .layer import CorrectorSolveError, LayerSolveError, check_tail, solve_layer
from .pde import BarrierCollisionError, PdeBlowupError, PdeGridError, run_pde, sharp_limit
from .potential import (
    MalformedPotentialError,
    load_spline_potential,
    make_cosine_potential,
    validate_potential,
)
from .reporting import read_table, write_csv, write_dat, write_json
from .verification import CHECKS, THEOREM_SUITE, run_checks

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

log = logging.getLogger("dislodyn")

EXIT_OK, EXIT_THEOREM, EXIT_PARSE, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2, 3, 4
KINDS = ("layer", "dynamics", "pde", "verify", "verify-theorems", "sweep")


class ConfigParseError(Exception):
    pass


class ConfigValidationError(Exception):
    pass


NUMERICAL_ERRORS = (LayerSolveError, CorrectorSolveError, PdeBlowupError, BarrierCollisionError,
                    TailMismatchError, FloatingPointError, MalformedPotentialError)


# ---------------------------------------------------------------------------
# schema


def _open(lo, hi):
    return lambda v: lo < v < hi, f"outside ({lo:g}, {hi:g})"


def _positive():
    return lambda v: v > 0, "must be positive"


@dataclass(frozen=True)
class Key:
    kind: str  # float, int, str, path, floats, ints, table, gamma
    default: object = None
    check: tuple | None = None
    choices: tuple = ()


SCHEMA = {
    "experiment": Key("str", None, choices=KINDS),
    "out": Key("str", "out"),
    "seed": Key("int", 0),
    "potential.kind": Key("str", "cosine", choices=("cosine", "spline")),
    "potential.spline_knots": Key("path", None),
    "op.pv_radius_cells": Key("int", 8, (lambda v: v >= 2, "must be >= 2")),
    "op.tail_mismatch_tol": Key("float", 1e-3, _positive()),
    "layer.s": Key("float", 0.5, _open(0.0, 1.0)),
    "layer.L": Key("float", 40.0, (lambda v: v >= 20, "must be >= 20")),
    "layer.h": Key("float", 0.05, _open(0.0, 1.0)),
    "layer.tol": Key("float", 1e-8, _positive()),
    "dyn.s": Key("float", 0.5, _open(0.0, 1.0)),
    "dyn.gamma": Key("gamma", "from-layer"),
    "dyn.positions": Key("floats", [-0.5, 0.5]),
    "dyn.orientations": Key("ints", [1, -1]),
    "dyn.sigma.kind": Key("str", "zero", choices=("zero", "constant", "separable")),
    "dyn.sigma.params": Key("table", {}),
    "dyn.horizon": Key("float", 10.0, _positive()),
    "dyn.ode_tol": Key("float", 1e-10, _open(0.0, 1e-2)),
    "pde.eps": Key("float", 0.04, _open(0.0, 1.0)),
    "pde.domain_halfwidth": Key("float", None, _positive()),
    "pde.cells": Key("int", None, (lambda v: v >= 16 and not v & (v - 1),
                                   "must be a power of two >= 16")),
    "pde.t_end": Key("float", None, _positive()),
    "pde.t_end_fraction": Key("float", 0.5, _open(0.0, 1.0)),
    "pde.snapshot_every": Key("float", None, _positive()),
    "pde.probe_x": Key("floats", [0.0]),
    "sweep.eps": Key("floats", [0.08, 0.04, 0.02]),
    "verify.criteria": Key("ints", list(THEOREM_SUITE)),
}


def flatten(tree: dict, prefix: str = "") -> dict:
    flat = {}
    for k, v in tree.items():
        name = f"{prefix}{k}"
        if isinstance(v, dict) and SCHEMA.get(name, Key("")).kind != "table":
            flat.update(flatten(v, name + "."))
        else:
            flat[name] = v
    return flat


def _coerce(name: str, key: Key, v):
    def bad(msg):
        return ConfigValidationError(f"{name} = {v!r}: {msg}")

    if key.kind in ("float", "gamma"):
        if key.kind == "gamma" and v == "from-layer":
            return v
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise bad("expected a number" + (" or 'from-layer'" if key.kind == "gamma" else ""))
        v = float(v)
        if not math.isfinite(v):
            raise bad("must be finite")
        if key.kind == "gamma" and v <= 0:
            raise bad("must be positive")
    elif key.kind == "int":
        if isinstance(v, bool) or not isinstance(v, int):
            raise bad("expected an integer")
    elif key.kind in ("str", "path"):
        if not isinstance(v, str):
            raise bad("expected a string")
        if key.choices and v not in key.choices:
            raise bad(f"expected one of {', '.join(key.choices)}")
    elif key.kind in ("floats", "ints"):
        if not isinstance(v, list) or not v:
            raise bad("expected a non-empty list")
        want = int if key.kind == "ints" else (int, float)
        if any(isinstance(e, bool) or not isinstance(e, want) for e in v):
            raise bad("list has entries of the wrong type")
        v = [int(e) for e in v] if key.kind == "ints" else [float(e) for e in v]
    elif key.kind == "table":
        if not isinstance(v, dict):
            raise bad("expected a table")
    if key.check is not None and v is not None and not isinstance(v, str):
        ok, msg = key.check
        items = v if isinstance(v, list) else [v]
        if not all(ok(e) for e in items):
            raise bad(msg)
    return v


@dataclass
class ExperimentConfig:
    kind: str
    values: dict
    source: Path | None = None
    raw: dict = field(default_factory=dict)

    def __getitem__(self, key: str):
        return self.values[key]

    @property
    def out(self) -> Path:
        p = Path(self.values["out"])
        if not p.is_absolute() and self.source is not None and self.raw.get("out") is None:
            return p
        return p


def validate(tree: dict, source: Path | None = None) -> ExperimentConfig:
    flat = flatten(tree)
    unknown = sorted(set(flat) - set(SCHEMA))
    if unknown:
        raise ConfigValidationError(f"unknown key(s): {', '.join(unknown)}")
    values = {}
    for name, key in SCHEMA.items():
        values[name] = _coerce(name, key, flat[name]) if name in flat else key.default
    if values["experiment"] is None:
        raise ConfigValidationError("experiment: missing (one of " + ", ".join(KINDS) + ")")
    if values["experiment"] == "verify-theorems":
        values["experiment"] = "verify"
    pos, ori = values["dyn.positions"], values["dyn.orientations"]
    if len(pos) != len(ori):
        raise ConfigValidationError("dyn.orientations: length differs from dyn.positions")
    if any(o not in (-1, 1) for o in ori):
        raise ConfigValidationError(f"dyn.orientations = {ori}: entries must be +1 or -1")
    if any(b <= a for a, b in zip(pos, pos[1:])):
        raise ConfigValidationError(f"dyn.positions = {pos}: must be strictly increasing")
    for c in values["verify.criteria"]:
        if c not in CHECKS:
            raise ConfigValidationError(f"verify.criteria: unknown criterion {c}")
    if values["potential.kind"] == "spline":
        path = values["potential.spline_knots"]
        if path is None:
            raise ConfigValidationError("potential.spline_knots: required for a spline potential")
        full = Path(path) if source is None else (source.parent / path)
        if not full.exists():
            raise ConfigValidationError(f"potential.spline_knots = {path!r}: file not found")
        values["potential.spline_knots"] = str(full)
    try:
        _stress(values)
    except (ValueError, TypeError) as exc:
        raise ConfigValidationError(f"dyn.sigma.params: {exc}") from exc
    return ExperimentConfig(values["experiment"], values, source, flat)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigParseError(f"cannot read {path}: {exc}") from exc
    try:
        tree = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigParseError(f"{path}: {exc}") from exc
    return validate(tree, path)


def preset_names() -> list:
    return sorted(p.name[:-5] for p in resources.files("dislodyn.presets").iterdir()
                  if p.name.endswith(".toml"))


def preset_path(name: str) -> Path:
    p = resources.files("dislodyn.presets") / f"{name}.toml"
    if not p.is_file():
        raise ConfigParseError(f"no preset named {name!r}; available: {', '.join(preset_names())}")
    return Path(str(p))


# ---------------------------------------------------------------------------
# building blocks from config values


def _stress(v: dict) -> dyn.StressField:
    kind = v["dyn.sigma.kind"]
    params = dict(v["dyn.sigma.params"])
    alpha = float(params.pop("alpha", 0.75))
    allowed = {"zero": set(), "constant": {"sigma0"},
               "separable": {"a", "b", "omega", "k", "phi"}}[kind]
    extra = set(params) - allowed
    if extra:
        raise ValueError(f"unexpected parameter(s) {sorted(extra)} for a {kind} stress")
    return dyn.StressField(kind, {k: float(x) for k, x in params.items()}, alpha)


def _potential(v: dict):
    if v["potential.kind"] == "cosine":
        return make_cosine_potential()
    p = load_spline_potential(v["potential.spline_knots"])
    rep = validate_potential(p)
    if not rep.passed:
        bad = [c.name for c in rep.checks if not c.passed]
        raise ConfigValidationError(f"potential.spline_knots: potential fails {', '.join(bad)}")
    return p


def _layer(v: dict, s: float):
    p = _potential(v)
    h = v["layer.h"]
    return solve_layer(p, s, v["layer.L"], h, tol=v["layer.tol"],
                       pv_radius=v["op.pv_radius_cells"] * h)


def _particles(v: dict) -> dyn.ParticleConfig:
    return dyn.ParticleConfig(tuple(v["dyn.positions"]), tuple(v["dyn.orientations"]))


def _gamma(v: dict, s: float) -> tuple[float, object]:
    g = v["dyn.gamma"]
    if g == "from-layer":
        lp = _layer(v, s)
        return lp.gamma, lp
    return float(g), None


# ---------------------------------------------------------------------------
# experiments


@dataclass
class Result:
    passed: bool
    artifacts: dict
    summary: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)


def run_layer(v: dict, out: Path, profile: Path | None = None) -> Result:
    s = v["layer.s"]
    lp = _layer(v, s)
    tail = check_tail(lp)
    report = lp.as_dict()
    report["tail_report"] = {"kappa_fit": tail.kappa_fit, "kappa_exceeds_2s": tail.kappa_exceeds_2s,
                             "leading_exponent": tail.leading_exponent,
                             "derivative_exponent": tail.derivative_exponent,
                             "saturated": tail.saturated}
    path = write_json(profile or out / "profile.json", report)
    return Result(True, {"profile": str(path)},
                  {"gamma": lp.gamma, "beta": lp.beta, "eta": lp.eta, "residual": lp.residual})


def _traj_rows(tr):
    return np.column_stack([tr.t, tr.x, tr.theta, tr.V, tr.V0])


def _traj_header(N: int) -> list:
    return (["t"] + [f"x_{i + 1}" for i in range(N)]
            + [f"theta_{i + 1}" for i in range(N - 1)] + ["V", "V0"])


def run_dynamics(v: dict, out: Path, traj_path: Path | None = None,
                 report_path: Path | None = None) -> Result:
    s = v["dyn.s"]
    cfg = _particles(v)
    sigma = _stress(v)
    gamma, _ = _gamma(v, s)
    horizon = v["dyn.horizon"]
    tr, rep = dyn.integrate(cfg, sigma, gamma, s, horizon, ode_tol=v["dyn.ode_tol"])
    if rep.classification == "solver-limit":
        raise FloatingPointError(f"particle integrator stopped: {rep.message}")
    checks = dyn.collision_bounds(cfg, sigma, gamma, s, rep, horizon=horizon)
    traj = write_csv(traj_path or out / "traj.csv", _traj_header(cfg.N), _traj_rows(tr))
    report = {"gamma": gamma, "s": s, "stress": sigma.as_dict(), "collision": rep.as_dict(),
              "theorem_checks": [c.as_dict() for c in checks]}
    rpath = write_json(report_path or out / "report.json", report)
    passed = all(c.passed for c in checks if c.hypothesis)
    return Result(passed, {"trajectory": str(traj), "report": str(rpath)},
                  {"T_c": rep.T_c, "classification": rep.classification,
                   "checks": {c.theorem: c.passed for c in checks if c.hypothesis}})


def _pde_once(v: dict, eps: float, out: Path, probes_path: Path | None = None,
              fields_dir: Path | None = None, report_path: Path | None = None) -> dict:
    s = v["dyn.s"]
    cfg = _particles(v)
    sigma = _stress(v)
    lp = _layer(v, s)
    gamma = lp.gamma if v["dyn.gamma"] == "from-layer" else float(v["dyn.gamma"])
    lim = sharp_limit(cfg, sigma, gamma, s, v["dyn.horizon"], v["dyn.ode_tol"])
    t_end = v["pde.t_end"]
    if t_end is None:
        if not lim.report.collided:
            raise ConfigValidationError("pde.t_end: required when the fronts never collide")
        t_end = v["pde.t_end_fraction"] * lim.T_c
    if lim.report.collided and t_end >= lim.report.t_lo:
        raise ConfigValidationError(f"pde.t_end = {t_end:g} is not before the collision "
                                    f"time {lim.T_c:g}")
    probes = [(t_end, x) for x in v["pde.probe_x"]]
    every = v["pde.snapshot_every"]
    snaps = [t_end]
    if every is not None:
        n = int(math.floor(t_end / every + 1e-9))
        snaps = sorted({k * every for k in range(n + 1)} | {t_end})
    run = run_pde(cfg, lp, sigma, eps, t_end, probes, snaps,
                  halfwidth=v["pde.domain_halfwidth"], cells=v["pde.cells"])
    v0 = np.array([float(lim(t, np.array([x]))[0]) for t, x in run.probes[:, :2]])
    rows = np.column_stack([run.probes, v0])
    ppath = write_csv(probes_path or out / "probes.csv", ["t", "x", "v_eps", "v0"], rows)
    fdir = fields_dir or out / "fields"
    snap_files = []
    for k, t in enumerate(sorted(run.snapshots)):
        x, val = run.snapshots[t]
        snap_files.append(str(write_csv(fdir / f"snapshot_{k:04d}.csv", ["x", "v_eps"],
                                        np.column_stack([x, val]))))
    N, K = cfg.N, cfg.K
    in_range = (run.v_min >= -K - 0.5) and (run.v_max <= N - K + 0.5)
    report = {"eps": eps, "s": s, "gamma": gamma, "t_end": t_end, "T_c": lim.T_c,
              "run": run.as_dict(), "snapshot_times": sorted(run.snapshots),
              "probe_errors": np.abs(rows[:, 2] - rows[:, 3]).tolist(),
              "range_ok": in_range,
              "note": "background centres are frozen at t = 0; front motion lives in w"}
    rpath = write_json(report_path or out / "pde_report.json", report)
    return {"passed": bool(in_range), "probes": str(ppath), "report": str(rpath),
            "snapshots": snap_files, "eps": eps,
            "errors": report["probe_errors"]}


def run_pde_experiment(v: dict, out: Path, **paths) -> Result:
    r = _pde_once(v, v["pde.eps"], out, **paths)
    return Result(r["passed"], {"probes": r["probes"], "report": r["report"],
                                "snapshots": r["snapshots"]},
                  {"eps": r["eps"], "probe_errors": r["errors"]})


def worker_count(jobs: int) -> int:
    cap = os.environ.get("DISLODYN_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = max(1, int(cap))
        except ValueError:
            raise ConfigValidationError(f"DISLODYN_THREADS = {cap!r}: expected an integer")
    return max(1, min(n, jobs))


def _sweep_job(args):
    v, eps, out = args
    return _pde_once(v, eps, Path(out))


def run_sweep(v: dict, out: Path) -> Result:
    eps_list = v["sweep.eps"]
    jobs = [(v, eps, str(out / f"eps_{i}")) for i, eps in enumerate(eps_list)]
    workers = worker_count(len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_job, jobs))
    else:
        results = [_sweep_job(j) for j in jobs]
    rows = [[r["eps"], *r["errors"]] for r in results]
    header = ["eps"] + [f"err_x{j}" for j in range(len(v["pde.probe_x"]))]
    conv = write_csv(out / "conv.csv", header, rows)
    errs = np.array([r["errors"] for r in results])
    order = np.argsort(eps_list)[::-1]
    monotone = bool(np.all(np.diff(errs[order], axis=0) < 0))
    artifacts = {"convergence": str(conv),
                 "runs": [{k: r[k] for k in ("eps", "probes", "report", "snapshots")}
                          for r in results]}
    passed = all(r["passed"] for r in results)
    return Result(passed, artifacts, {"monotone_decrease": monotone, "workers": workers})


def run_verify(v: dict, out: Path, criteria=None) -> Result:
    criteria = list(criteria or v["verify.criteria"])
    outcomes = run_checks(criteria)
    for o in outcomes:
        print(o.line())
    stable = [o.as_dict() for o in outcomes if o.name != "runtime"]
    path = write_json(out / "verify.json", {"criteria": criteria, "outcomes": stable})
    timing = {f"{o.criterion}": o.measured for o in outcomes if o.name == "runtime"}
    return Result(all(o.passed for o in outcomes), {"verify": str(path)},
                  {"outcomes": [o.as_dict() for o in outcomes]}, timing)


DISPATCH = {"layer": run_layer, "dynamics": run_dynamics, "pde": run_pde_experiment,
            "sweep": run_sweep, "verify": run_verify}


def _files(artifacts) -> list:
    out = []
    if isinstance(artifacts, dict):
        for v in artifacts.values():
            out.extend(_files(v))
    elif isinstance(artifacts, list):
        for v in artifacts:
            out.extend(_files(v))
    elif isinstance(artifacts, str):
        out.append(artifacts)
    return out


def write_manifest(cfg: ExperimentConfig, out: Path, res: Result, wall: float) -> Path:
    manifest = {"kind": cfg.kind, "config": cfg.values, "version": __version__,
                "python": platform.python_version(), "numpy": np.__version__,
                "wall_clock_s": wall, "started": time.strftime("%Y-%m-%dT%H:%M:%S"),
                "artifacts": res.artifacts, "files": _files(res.artifacts),
                "summary": res.summary, "timing": res.timing, "rollup": res.passed}
    return write_json(out / "manifest.json", manifest)


def run(config_path, out: str | None = None, **paths) -> tuple[Result, Path]:
    cfg = load_config(config_path)
    target = Path(out) if out else Path(cfg["out"])
    target.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    res = DISPATCH[cfg.kind](cfg.values, target, **paths)
    return res, write_manifest(cfg, target, res, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# plot data


class MissingArtifactError(Exception):
    pass


def emit_plotdata(manifest_path, out: str | Path | None = None) -> list:
    """Gnuplot tables from the artifacts listed in a manifest."""
    import json

    manifest_path = Path(manifest_path)
    try:
        m = json.loads(manifest_path.read_text())
    except (OSError, ValueError) as exc:
        raise MissingArtifactError(f"cannot read manifest {manifest_path}: {exc}") from exc
    target = Path(out) if out else manifest_path.parent / "plot"
    art = m.get("artifacts", {})
    written = []

    def need(path):
        if path is None or not Path(path).exists():
            raise MissingArtifactError(f"artifact {path} is missing")
        return path

    kind = m.get("kind")
    if kind == "dynamics":
        header, data = read_table(need(art.get("trajectory")))
        if data.shape[0] < 2:
            raise MissingArtifactError("trajectory is empty")
        N = sum(1 for h in header if h.startswith("x_"))
        t = data[:, :1]
        written.append(write_dat(target / "traj.dat", ["t"] + header[1:N + 1],
                                 np.hstack([t, data[:, 1:N + 1]])))
        written.append(write_dat(target / "theta.dat", ["t"] + header[N + 1:2 * N],
                                 np.hstack([t, data[:, N + 1:2 * N]])))
        written.append(write_dat(target / "V0.dat", ["t", "V", "V0"],
                                 np.hstack([t, data[:, -2:]])))
    elif kind == "pde":
        for k, path in enumerate(art.get("snapshots", [])):
            header, data = read_table(need(path))
            written.append(write_dat(target / f"snapshot_{k:04d}.dat", header, data))
        if not written:
            raise MissingArtifactError("no snapshots listed")
    elif kind == "sweep":
        header, data = read_table(need(art.get("convergence")))
        written.append(write_dat(target / "conv.dat", ["eps", "probe_error"],
                                 np.column_stack([data[:, 0], np.max(data[:, 1:], axis=1)])))
    else:
        raise MissingArtifactError(f"no plot data defined for a {kind!r} manifest")
    return [str(p) for p in written]


# ---------------------------------------------------------------------------
# entry point


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dislodyn", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run any experiment from a config or preset")
    g = r.add_mutually_exclusive_group(required=True)
    g.add_argument("config", nargs="?")
    g.add_argument("--preset")
    g.add_argument("--list-presets", action="store_true")
    r.add_argument("--out")

    la = sub.add_parser("layer", help="solve the stationary layer")
    la.add_argument("--config")
    la.add_argument("--s", type=float)
    la.add_argument("--potential", choices=("cosine", "spline"))
    la.add_argument("--knots", help="two-column CSV v,W(v) for a spline potential")
    la.add_argument("--L", type=float)
    la.add_argument("--h", type=float)
    la.add_argument("--out", default="profile.json")

    d = sub.add_parser("dynamics", help="integrate the particle system")
    d.add_argument("--config", required=True)
    d.add_argument("--out", default="traj.csv")
    d.add_argument("--report", default="report.json")

    pde = sub.add_parser("pde", help="evolve the phase field")
    pde.add_argument("--config", required=True)
    pde.add_argument("--probes", default="probes.csv")
    pde.add_argument("--out", default="fields")
    pde.add_argument("--report", default="pde_report.json")

    ver = sub.add_parser("verify", help="run acceptance checks by number")
    ver.add_argument("--config")
    ver.add_argument("--criteria", type=int, nargs="+")
    ver.add_argument("--out", default="verify_out")

    sw = sub.add_parser("sweep", help="eps sweep of the phase field")
    sw.add_argument("--config", required=True)
    sw.add_argument("--out")

    pl = sub.add_parser("plotdata", help="gnuplot tables from a manifest")
    pl.add_argument("--manifest", required=True)
    pl.add_argument("--out")
    return ap


def _config_for(args, kind: str) -> ExperimentConfig:
    if getattr(args, "config", None):
        cfg = load_config(args.config)
        if cfg.kind != kind:
            raise ConfigValidationError(f"experiment = {cfg.kind!r} but the {kind} "
                                        "subcommand was used")
        return cfg
    return validate({"experiment": kind})


def _dispatch(args) -> int:
    if args.command == "run":
        if args.list_presets:
            print("\n".join(preset_names()))
            return EXIT_OK
        path = preset_path(args.preset) if args.preset else args.config
        res, manifest = run(path, args.out)
        print(f"manifest: {manifest}  rollup: {'pass' if res.passed else 'FAIL'}")
        return EXIT_OK if res.passed else EXIT_THEOREM

    if args.command == "plotdata":
        files = emit_plotdata(args.manifest, args.out)
        print("\n".join(files))
        return EXIT_OK

    if args.command == "layer":
        cfg = _config_for(args, "layer")
        v = dict(cfg.values)
        overrides = {"layer.s": args.s, "potential.kind": args.potential,
                     "potential.spline_knots": args.knots, "layer.L": args.L,
                     "layer.h": args.h}
        tree = {k: x for k, x in {**cfg.raw, **overrides}.items() if x is not None}
        tree["experiment"] = "layer"
        v = validate(_unflatten(tree)).values
        out = Path(args.out)
        t0 = time.perf_counter()
        res = run_layer(v, out.parent, profile=out)
        write_manifest(ExperimentConfig("layer", v), out.parent, res, time.perf_counter() - t0)
        return EXIT_OK

    cfg = _config_for(args, "verify" if args.command == "verify" else args.command)
    t0 = time.perf_counter()
    if args.command == "dynamics":
        out = Path(args.out).parent
        res = run_dynamics(cfg.values, out, Path(args.out), Path(args.report))
    elif args.command == "pde":
        out = Path(args.report).parent
        res = run_pde_experiment(cfg.values, out, probes_path=Path(args.probes),
                                 fields_dir=Path(args.out), report_path=Path(args.report))
    elif args.command == "sweep":
        out = Path(args.out or cfg["out"])
        res = run_sweep(cfg.values, out)
    else:
        out = Path(args.out)
        res = run_verify(cfg.values, out, args.criteria)
    write_manifest(cfg, out, res, time.perf_counter() - t0)
    return EXIT_OK if res.passed else EXIT_THEOREM


def _unflatten(flat: dict) -> dict:
    tree: dict = {}
    for k, v in flat.items():
        node = tree
        parts = k.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = v
    return tree


def main(argv=None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with status 2
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(args)
    except ConfigParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ConfigValidationError, PdeGridError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except MissingArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
