"""Config-driven experiment runner.

Usage::

    gdaflow run <config.json | preset-name> [--output-dir D] [--seed S] [--tol T] [--quiet]
    gdaflow ladder <config.json | preset-name> [...]
    gdaflow scenarios

Exit codes: 0 success, 2 configuration error, 3 inner-solver non-convergence
(partial artifacts are kept and flagged in ``report.json``).
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import os
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .core import BivariateObjective, GdaflowError, NoConvergence, ProductPoint, sample_points
from .diagnostics import ROW_FIELDS, build_report, local_slope
from .hilbert import (
    BoxIndicator,
    CompositeSaddleObjective,
    L1Penalty,
    QuadraticSaddleObjective,
    SquaredNorm,
    ZeroTerm,
    exact_linear_flow,
    hilbert_point,
)
from .saddle import Box
from .scheme import (
    ErrorBudget,
    FlowTrajectory,
    a_priori_error,
    error_bound_constant,
    inner_tolerance,
    resolvent_comparison_bound,
    resolvent_step,
)
from .wasserstein import EntropicBilinearObjective, GridMeasure, kernel_matrix

OUTPUT_ENV = "GDAFLOW_OUTPUT_DIR"
EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGENCE = 0, 2, 3
BACKENDS = ("hilbert", "wasserstein1d")
CHECKS = ("ni_gap", "global_slope", "evi", "contraction", "ni_decay", "slope_monotonicity")


class ConfigError(GdaflowError, ValueError):
    """Invalid experiment configuration; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


# ---------------------------------------------------------------- config


@dataclass
class DiagnosticsConfig:
    """Checker toggles, number of random test points and an optional feasible box.

    ``feasible_box`` is ``[[x_lo, x_hi], [y_lo, y_hi]]`` (Hilbert backend only).
    """

    ni_gap: bool = True
    global_slope: bool = True
    evi: bool = True
    contraction: bool = True
    ni_decay: bool = True
    slope_monotonicity: bool = True
    test_points: int = 20
    feasible_box: list | None = None


@dataclass
class ExperimentConfig:
    """One experiment.

    ``objective`` is a backend-specific mapping (see :func:`build_objective`),
    ``initial`` holds ``{"x": ..., "y": ...}`` (coordinates or weights) and
    ``companion`` an optional second initial point run on the same grid.
    """

    backend: str
    objective: dict
    initial: dict
    T: float
    steps: int
    lam: float | None = None
    ladder: list[int] | None = None
    companion: dict | None = None
    diagnostics: DiagnosticsConfig = field(default_factory=DiagnosticsConfig)
    output_dir: str | None = None
    scenario: str | None = None
    seed: int = 0
    tol: float = 1e-6

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config", "top level must be an object")
        raw = copy.deepcopy(raw)
        name = raw.get("scenario")
        if name is not None:
            if name not in PRESETS:
                raise ConfigError("scenario", f"unknown scenario {name!r}; valid: {', '.join(PRESETS)}")
            base = copy.deepcopy(PRESETS[name][1])
            diag = {**base.get("diagnostics", {}), **raw.pop("diagnostics", {})}
            raw = {**base, **raw, "diagnostics": diag}
        known = {f for f in cls.__dataclass_fields__}
        for key in raw:
            if key not in known:
                raise ConfigError(key, "unknown field")
        for req in ("backend", "objective", "initial", "T", "steps"):
            if req not in raw:
                raise ConfigError(req, "missing required field")
        diag = raw.pop("diagnostics", {}) or {}
        if not isinstance(diag, dict):
            raise ConfigError("diagnostics", "must be an object")
        for key in diag:
            if key not in DiagnosticsConfig.__dataclass_fields__:
                raise ConfigError(f"diagnostics.{key}", "unknown field")
        cfg = cls(**raw, diagnostics=DiagnosticsConfig(**diag))
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.backend not in BACKENDS:
            raise ConfigError("backend", f"expected one of {BACKENDS}, got {self.backend!r}")
        if not isinstance(self.objective, dict):
            raise ConfigError("objective", "must be an object")
        if not isinstance(self.initial, dict):
            raise ConfigError("initial", "must be an object")
        if not _is_real(self.T) or not self.T > 0:
            raise ConfigError("T", "horizon must be a positive number")
        if isinstance(self.steps, bool) or not isinstance(self.steps, int) or self.steps < 1:
            raise ConfigError("steps", "must be a positive integer")
        if self.ladder is not None:
            if not isinstance(self.ladder, list) or not self.ladder or \
                    any(isinstance(n, bool) or not isinstance(n, int) or n < 1 for n in self.ladder):
                raise ConfigError("ladder", "must be a nonempty list of positive integers")
        if self.lam is not None and not _is_real(self.lam):
            raise ConfigError("lam", "must be a number")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise ConfigError("seed", "must be an integer")
        if not _is_real(self.tol) or not self.tol > 0:
            raise ConfigError("tol", "must be a positive number")
        d = self.diagnostics
        for name in CHECKS:
            if not isinstance(getattr(d, name), bool):
                raise ConfigError(f"diagnostics.{name}", "must be true or false")
        if isinstance(d.test_points, bool) or not isinstance(d.test_points, int) or d.test_points < 0:
            raise ConfigError("diagnostics.test_points", "must be a nonnegative integer")


def _is_real(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _array(spec: dict, key: str, where: str, ndim: int, default=None) -> np.ndarray:
    if key not in spec:
        if default is not None:
            return np.asarray(default, dtype=float)
        raise ConfigError(f"{where}.{key}", "missing required field")
    try:
        arr = np.array(spec[key], dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}.{key}", "must be numeric") from None
    if ndim == 2:
        arr = np.atleast_2d(arr)
    else:
        arr = np.atleast_1d(arr)
    if arr.ndim != ndim or not np.all(np.isfinite(arr)):
        raise ConfigError(f"{where}.{key}", f"must be a finite {ndim}-d array")
    return arr


def _prox_term(spec, where: str):
    if spec is None:
        return ZeroTerm()
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigError(where, "must be an object with a 'type'")
    kind = spec["type"]
    try:
        if kind == "zero":
            return ZeroTerm()
        if kind == "box":
            return BoxIndicator(float(spec.get("lo", -math.inf)), float(spec.get("hi", math.inf)))
        if kind == "l1":
            return L1Penalty(float(spec.get("weight", 1.0)))
        if kind == "sqnorm":
            return SquaredNorm(float(spec.get("weight", 1.0)))
    except (TypeError, ValueError):
        raise ConfigError(where, "parameters must be numbers") from None
    raise ConfigError(f"{where}.type", f"unknown term {kind!r}; expected zero, box, l1 or sqnorm")


def _quadratic(spec: dict, where: str, lam) -> QuadraticSaddleObjective:
    C = _array(spec, "C", where, 2)
    d1, d2 = C.shape
    A = _array(spec, "A", where, 2, np.zeros((d1, d1)))
    B = _array(spec, "B", where, 2, np.zeros((d2, d2)))
    a = _array(spec, "a", where, 1, np.zeros(d1))
    b = _array(spec, "b", where, 1, np.zeros(d2))
    try:
        return QuadraticSaddleObjective(A, a, C, B, b, lam)
    except ValueError as exc:
        raise ConfigError(where, str(exc)) from None


def build_objective(cfg: ExperimentConfig) -> BivariateObjective:
    """Objective from its config mapping.

    Hilbert: ``{"kind": "quadratic", "A", "a", "C", "B", "b"}`` or
    ``{"kind": "composite", "smooth": {...quadratic...}, "f": term, "g": term}``
    with terms ``{"type": "zero" | "box" | "l1" | "sqnorm", ...}``.
    Wasserstein: ``{"support_x", "support_y", "kernel", "beta", "rho_x", "rho_y"}``
    where ``kernel`` is a matrix or one of ``"x*y"``, ``"-(x-y)^2"``, ``"|x-y|"``
    and ``beta`` a positive number or ``"inf"``.
    """
    spec = cfg.objective
    if cfg.backend == "hilbert":
        kind = spec.get("kind", "quadratic")
        if kind == "quadratic":
            return _quadratic(spec, "objective", cfg.lam)
        if kind == "composite":
            if not isinstance(spec.get("smooth"), dict):
                raise ConfigError("objective.smooth", "missing quadratic smooth part")
            smooth = _quadratic(spec["smooth"], "objective.smooth", None)
            f = _prox_term(spec.get("f"), "objective.f")
            g = _prox_term(spec.get("g"), "objective.g")
            return CompositeSaddleObjective(smooth, f, g, cfg.lam)
        raise ConfigError("objective.kind", f"unknown kind {kind!r}; expected quadratic or composite")
    sx = _array(spec, "support_x", "objective", 1)
    sy = _array(spec, "support_y", "objective", 1)
    if "beta" not in spec:
        raise ConfigError("objective.beta", "missing required field")
    beta = spec["beta"]
    if beta == "inf":
        beta = math.inf
    if not isinstance(beta, (int, float)) or isinstance(beta, bool) or not beta > 0:
        raise ConfigError("objective.beta", "must be a positive number or 'inf'")
    kernel = spec.get("kernel")
    if kernel is None:
        raise ConfigError("objective.kernel", "missing required field")
    try:
        ell = kernel_matrix(kernel, sx, sy) if isinstance(kernel, str) else _array(spec, "kernel", "objective", 2)
    except ValueError as exc:
        raise ConfigError("objective.kernel", str(exc)) from None
    try:
        rx = GridMeasure(sx, _array(spec, "rho_x", "objective", 1, np.full(sx.size, 1.0 / sx.size)))
        ry = GridMeasure(sy, _array(spec, "rho_y", "objective", 1, np.full(sy.size, 1.0 / sy.size)))
        return EntropicBilinearObjective(ell, float(beta), rx, ry, cfg.lam)
    except (ValueError, GdaflowError) as exc:
        raise ConfigError("objective", str(exc)) from None


def build_point(cfg: ExperimentConfig, obj: BivariateObjective, spec: dict, where: str) -> ProductPoint:
    if not isinstance(spec, dict) or "x" not in spec or "y" not in spec:
        raise ConfigError(where, "must be an object with 'x' and 'y'")
    x = _array(spec, "x", where, 1)
    y = _array(spec, "y", where, 1)
    if cfg.backend == "hilbert":
        d1, d2 = obj.dims
        if x.size != d1 or y.size != d2:
            raise ConfigError(where, f"dimensions ({x.size}, {y.size}) do not match objective ({d1}, {d2})")
        z = hilbert_point(x, y)
        if not (obj.in_domain_x(z.x) and obj.in_domain_y(z.y)):
            raise ConfigError(where, "initial point lies outside the domain")
        return z
    try:
        z = obj.point(GridMeasure(obj.rho_x.support, x / x.sum() if x.sum() > 0 else x),
                      GridMeasure(obj.rho_y.support, y / y.sum() if y.sum() > 0 else y))
    except (ValueError, GdaflowError) as exc:
        raise ConfigError(where, str(exc)) from None
    return z


def _feasible_box(cfg: ExperimentConfig):
    box = cfg.diagnostics.feasible_box
    if box is None:
        return None
    try:
        (xl, xh), (yl, yh) = box
        return Box(float(xl), float(xh)), Box(float(yl), float(yh))
    except (TypeError, ValueError):
        raise ConfigError("diagnostics.feasible_box", "must be [[x_lo, x_hi], [y_lo, y_hi]]") from None


@dataclass
class Experiment:
    """A validated configuration with its objective and points built."""

    config: ExperimentConfig
    objective: BivariateObjective
    z0: ProductPoint
    companion: ProductPoint | None
    feasible_box: Any


def prepare(cfg: ExperimentConfig, steps: list[int] | None = None) -> Experiment:
    """Build everything the run needs; raises :class:`ConfigError` only."""
    obj = build_objective(cfg)
    z0 = build_point(cfg, obj, cfg.initial, "initial")
    comp = build_point(cfg, obj, cfg.companion, "companion") if cfg.companion is not None else None
    lm = obj.modulus.lambda_minus
    for n in steps or [cfg.steps]:
        if lm * cfg.T / n >= 1:
            raise ConfigError("steps", f"T/n = {cfg.T / n} must be below 1/lambda_minus = {1 / lm}")
    return Experiment(cfg, obj, z0, comp, _feasible_box(cfg))


# ---------------------------------------------------------------- presets

_TIGHT = {"kind": "quadratic", "A": [[1.0]], "a": [0.0], "C": [[1.0]], "B": [[1.0]], "b": [0.0]}
_BILINEAR = {"kind": "quadratic", "A": [[0.0]], "a": [0.0], "C": [[1.0]], "B": [[0.0]], "b": [0.0]}
_GRID16 = [k / 15 for k in range(16)]
_GRID8 = [-1 + 2 * k / 7 for k in range(8)]


def _exp_weights(grid, rate):
    w = np.exp(rate * np.asarray(grid))
    return (w / w.sum()).tolist()


PRESETS: dict[str, tuple[str, dict]] = {
    "periodic-orbit": (
        "phi = xy from (1, 0): the flow is the unit circle, period 2 pi",
        {"backend": "hilbert", "objective": _BILINEAR, "initial": {"x": [1.0], "y": [0.0]},
         "T": 2 * math.pi, "steps": 4096, "lam": 0.0,
         "diagnostics": {"feasible_box": [[-2.0, 2.0], [-2.0, 2.0]], "ni_decay": False}}),
    "tight-decay": (
        "x^2/2 + xy - y^2/2 from (1, 1): the gap decay bound is attained",
        {"backend": "hilbert", "objective": _TIGHT, "initial": {"x": [1.0], "y": [1.0]},
         "T": 2.0, "steps": 1024, "lam": 1.0}),
    "contraction-pair": (
        "two flows of the tight quadratic contract at rate e^{-2t}",
        {"backend": "hilbert", "objective": _TIGHT, "initial": {"x": [1.0], "y": [1.0]},
         "companion": {"x": [-0.5], "y": [0.25]}, "T": 2.0, "steps": 1024, "lam": 1.0}),
    "composite-box": (
        "2-d strongly convex-concave quadratic with a box on x and an l1 penalty on y",
        {"backend": "hilbert",
         "objective": {"kind": "composite",
                       "smooth": {"A": [[1.0, 0.0], [0.0, 2.0]], "a": [0.5, -1.0],
                                  "C": [[1.0, 2.0], [-1.0, 0.5]],
                                  "B": [[1.5, 0.0], [0.0, 1.0]], "b": [0.0, 0.3]},
                       "f": {"type": "box", "lo": -0.5, "hi": 0.5},
                       "g": {"type": "l1", "weight": 0.2}},
         "initial": {"x": [0.5, -0.5], "y": [1.0, -1.0]}, "T": 2.0, "steps": 256,
         "diagnostics": {"global_slope": False}}),
    "wasserstein-entropic": (
        "entropic bilinear game on a 16-point grid in [0, 1], beta = 1",
        {"backend": "wasserstein1d",
         "objective": {"support_x": _GRID16, "support_y": _GRID16, "kernel": "x*y", "beta": 1.0},
         "initial": {"x": _exp_weights(_GRID16, -8.0), "y": _exp_weights(_GRID16, 8.0)},
         "T": 5.0, "steps": 10}),
    "wasserstein-bilinear-lambda0": (
        "unregularized bilinear game on an 8-point grid in [-1, 1] (modulus 0)",
        {"backend": "wasserstein1d",
         "objective": {"support_x": _GRID8, "support_y": _GRID8, "kernel": "x*y", "beta": "inf"},
         "initial": {"x": _exp_weights(_GRID8, 2.0), "y": _exp_weights(_GRID8, -1.0)},
         "T": 2.0, "steps": 8, "diagnostics": {"ni_decay": False}}),
    "refinement-ladder": (
        "phi = xy, n = 64 ... 4096 against the exact rotation",
        {"backend": "hilbert", "objective": _BILINEAR, "initial": {"x": [1.0], "y": [0.0]},
         "T": 1.0, "steps": 64, "lam": 0.0, "ladder": [64, 128, 256, 512, 1024, 2048, 4096],
         "diagnostics": {"feasible_box": [[-2.0, 2.0], [-2.0, 2.0]], "ni_decay": False}}),
}


def list_scenarios() -> list[tuple[str, str]]:
    return [(name, desc) for name, (desc, _) in PRESETS.items()]


def load_config(source: str) -> ExperimentConfig:
    """A JSON config file, or the name of a preset."""
    path = Path(source)
    if path.is_file():
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON: {exc}") from None
        return ExperimentConfig.from_dict(raw)
    if source in PRESETS:
        return ExperimentConfig.from_dict({"scenario": source})
    raise ConfigError("config", f"no such file or scenario {source!r}; valid scenarios: {', '.join(PRESETS)}")


# ---------------------------------------------------------------- output


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _coords(z: ProductPoint) -> tuple[np.ndarray, np.ndarray]:
    x, y = z.x, z.y
    if isinstance(x, GridMeasure):
        return x.weights, y.weights
    return np.atleast_1d(x), np.atleast_1d(y)


def write_trajectory(path: Path, traj: FlowTrajectory) -> None:
    x0, y0 = _coords(traj.points[0])
    header = ["t"] + [f"x{i}" for i in range(x0.size)] + [f"y{j}" for j in range(y0.size)]
    _write_csv(path, header, ([t, *_coords(z)[0], *_coords(z)[1]] for t, z in zip(traj.times, traj.points)))


def write_json(path: Path, payload: dict) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if math.isfinite(f) else repr(f)
    if isinstance(v, np.integer):
        return int(v)
    return v


def resolve_output_dir(cfg: ExperimentConfig, flag: str | None, label: str) -> Path:
    """Flag, then environment variable, then config, then ``gdaflow-out/<label>``."""
    for cand in (flag, os.environ.get(OUTPUT_ENV), cfg.output_dir):
        if cand:
            return Path(cand)
    return Path("gdaflow-out") / label


# ---------------------------------------------------------------- running


def run_trajectory(obj, z0, tau: float, steps: int, tol: float) -> tuple[FlowTrajectory, NoConvergence | None]:
    """Scheme iteration that keeps the partial trajectory on failure."""
    tol_in = inner_tolerance(tol, tau)
    points, certs = [z0], []
    z = z0
    failure = None
    for _ in range(steps):
        try:
            res = resolvent_step(obj, z, tau, tol_in)
        except NoConvergence as exc:
            failure = exc
            break
        certs.append(res)
        z = res.point
        points.append(z)
    times = np.arange(len(points)) * tau
    return FlowTrajectory(times, tuple(points), tau, tuple(certs), tol_in), failure


def _base_steps(T: float, lm: float, n: int) -> int:
    """Smallest power-of-two divisor-free base ``N`` with ``lm T / N < 1``, capped at ``n``."""
    N = 1
    while lm * T / N >= 1 and N < n:
        N *= 2
    return N


def error_budget(obj, z0, T: float, n: int, N: int | None = None) -> ErrorBudget:
    lm = obj.modulus.lambda_minus
    N = _base_steps(T, lm, n) if N is None else N
    return ErrorBudget(local_slope(obj, z0, "exact"), T, N, lm, n)


def _saddle_of(obj) -> ProductPoint | None:
    if isinstance(obj, QuadraticSaddleObjective) and obj.lam > 0:
        return obj.saddle_point()
    if isinstance(obj, EntropicBilinearObjective) and obj.inv_beta > 0:
        return obj.saddle_point()
    return None


def _test_points(exp: Experiment) -> list[ProductPoint]:
    k = exp.config.diagnostics.test_points
    obj = exp.objective
    curves = obj.curve_provider()
    xs = sample_points(curves.sample_x, k, exp.config.seed)
    ys = sample_points(curves.sample_y, k, exp.config.seed + 1)
    return [obj.point(x, y) for x, y in zip(xs, ys)]


def _cert_summary(traj: FlowTrajectory) -> dict:
    if not traj.certificates:
        return {"steps": 0}
    gaps = [c.gap for c in traj.certificates]
    return {"steps": len(gaps), "max_gap": max(gaps), "inner_tol": traj.tol,
            "iterations": int(sum(c.iterations for c in traj.certificates)),
            "methods": sorted({c.method for c in traj.certificates})}


def _point_json(z: ProductPoint) -> dict:
    x, y = _coords(z)
    return {"x": x.tolist(), "y": y.tolist()}


def run_experiment(cfg: ExperimentConfig, output_dir: str | None = None, quiet: bool = False) -> int:
    """Run one configuration and write its artifacts; returns the exit status."""
    t_start = time.perf_counter()
    exp = prepare(cfg)
    out = resolve_output_dir(cfg, output_dir, cfg.scenario or "run")
    tests = _test_points(exp) if cfg.diagnostics.evi else []
    obj, n, T = exp.objective, cfg.steps, cfg.T
    tau = T / n
    out.mkdir(parents=True, exist_ok=True)

    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    traj, failure = run_trajectory(obj, exp.z0, tau, n, cfg.tol)
    comp = None
    if exp.companion is not None and failure is None:
        comp, failure = run_trajectory(obj, exp.companion, tau, n, cfg.tol)
    timings["scheme"] = time.perf_counter() - t0
    write_trajectory(out / "trajectory.csv", traj)

    t0 = time.perf_counter()
    d = cfg.diagnostics
    saddle = _saddle_of(obj)
    lam = obj.modulus.lam
    budget = error_budget(obj, exp.z0, T, n)
    a_priori = a_priori_error(budget)
    if comp is not None and len(comp.points) != len(traj.points):
        comp = None
    report = build_report(
        obj, traj, lam, saddle=saddle, companion=comp if d.contraction else None,
        test_points=tests, feasible_box=exp.feasible_box,
        global_slopes=d.global_slope)
    if not d.contraction:
        report.summary.pop("contraction", None)
    if not d.ni_decay:
        report.summary.pop("ni_decay", None)
    if not d.slope_monotonicity:
        report.summary.pop("slope_monotonicity", None)
    if not d.ni_gap:
        report.columns["ni_gap"] = np.full(len(report), math.nan)
    _write_csv(out / "diagnostics.csv", list(ROW_FIELDS), report.rows())
    timings["diagnostics"] = time.perf_counter() - t0

    lm = obj.modulus.lambda_minus
    summary = {
        "status": "non-convergence" if failure else "ok",
        "steps_completed": len(traj.points) - 1,
        "tau": tau,
        "lambda": lam,
        "initial": _point_json(exp.z0),
        "final": _point_json(traj.final),
        "distance_final_to_initial": obj.metric.dist_z(traj.final, exp.z0),
        "certificates": _cert_summary(traj),
        "bounds": {
            "slope0": budget.slope0, "N": budget.N,
            "error_bound_constant": error_bound_constant(T, budget.N, lm),
            "a_priori_error": a_priori,
            "resolvent_comparison_bound_tau_vs_tau_half":
                resolvent_comparison_bound(budget.slope0, tau, tau / 2, n, 2 * n, lm),
        },
        "violations": report.summary,
    }
    if saddle is not None:
        summary["saddle"] = _point_json(saddle)
        summary["distance_final_to_saddle"] = obj.metric.dist_z(traj.final, saddle)
    if failure is not None:
        summary["failure"] = str(failure)
    write_json(out / "report.json", summary)
    timings["total"] = time.perf_counter() - t_start
    _write_manifest(out, cfg, timings)
    if not quiet:
        print(f"{cfg.scenario or 'run'}: {summary['status']} ({len(traj.points) - 1}/{n} steps) -> {out}")
    return EXIT_NONCONVERGENCE if failure else EXIT_OK


def _write_manifest(out: Path, cfg: ExperimentConfig, timings: dict) -> None:
    write_json(out / "manifest.json", {
        "config": cfg.to_dict(), "version": __version__, "timings": timings,
        "python": platform.python_version(), "numpy": np.__version__})


def _reference_final(exp: Experiment, n_ref: int) -> tuple[ProductPoint | None, str, NoConvergence | None]:
    obj = exp.objective
    if isinstance(obj, QuadraticSaddleObjective):
        return exact_linear_flow(obj, exp.z0, exp.config.T), "exact", None
    traj, fail = run_trajectory(obj, exp.z0, exp.config.T / n_ref, n_ref, exp.config.tol)
    return (None if fail else traj.final), f"reference n={n_ref}", fail


def fit_loglog_slope(ns, errors) -> float:
    ns, errors = np.asarray(ns, dtype=float), np.asarray(errors, dtype=float)
    keep = errors > 0
    if keep.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(ns[keep]), np.log(errors[keep]), 1)[0])


def run_refinement_ladder(cfg: ExperimentConfig, output_dir: str | None = None, quiet: bool = False) -> int:
    """Distance errors at ``T`` over a ladder of step counts, with a-priori bounds."""
    t_start = time.perf_counter()
    ladder = cfg.ladder or [cfg.steps * 2 ** k for k in range(4)]
    exp = prepare(cfg, ladder)
    out = resolve_output_dir(cfg, output_dir, (cfg.scenario or "run") + "-ladder")
    out.mkdir(parents=True, exist_ok=True)
    obj, T = exp.objective, cfg.T
    ref, ref_kind, failure = _reference_final(exp, 4 * max(ladder))
    rows, status = [], "ok"
    N = _base_steps(T, obj.modulus.lambda_minus, min(ladder))
    if failure is None:
        for n in sorted(ladder):
            traj, failure = run_trajectory(obj, exp.z0, T / n, n, cfg.tol)
            if failure is not None:
                break
            err = obj.metric.dist_z(traj.final, ref)
            bound = a_priori_error(error_budget(obj, exp.z0, T, n, N))
            rows.append((n, err, bound, err / bound if bound > 0 else math.nan))
    if failure is not None:
        status = "non-convergence"
    _write_csv(out / "rates.csv", ["n", "error", "a_priori_bound", "ratio"], rows)
    slope = fit_loglog_slope([r[0] for r in rows], [r[1] for r in rows])
    payload = {"status": status, "reference": ref_kind, "N": N, "fitted_slope": slope,
               "max_ratio": max((r[3] for r in rows), default=math.nan),
               "monotone": all(b[1] <= a[1] for a, b in zip(rows, rows[1:]))}
    if failure is not None:
        payload["failure"] = str(failure)
    write_json(out / "report.json", payload)
    _write_manifest(out, cfg, {"total": time.perf_counter() - t_start})
    if not quiet:
        print(f"{cfg.scenario or 'ladder'}: {status}, fitted slope {slope:.3f} -> {out}")
    return EXIT_NONCONVERGENCE if failure else EXIT_OK


# ---------------------------------------------------------------- entry point


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gdaflow", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "run one experiment"), ("ladder", "run a refinement ladder")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("config", help="JSON config path or preset name")
        sp.add_argument("--output-dir", default=None, help=f"output directory (else ${OUTPUT_ENV})")
        sp.add_argument("--seed", type=int, default=None, help="seed for sampled diagnostics")
        sp.add_argument("--tol", type=float, default=None, help="scheme tolerance (inner: tol * tau^2)")
        sp.add_argument("--quiet", action="store_true")
    sub.add_parser("scenarios", help="list the presets")
    return p


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "scenarios":
        for name, desc in list_scenarios():
            print(f"{name:32s} {desc}")
        return EXIT_OK
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.tol is not None:
            cfg.tol = args.tol
        cfg.validate()
        runner = run_experiment if args.command == "run" else run_refinement_ladder
        return runner(cfg, args.output_dir, args.quiet)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
