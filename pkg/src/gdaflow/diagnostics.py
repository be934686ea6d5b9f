"""Certificates for the inequalities satisfied by gradient descent-ascent flows.

Every checker returns a *signed* violation: a value ``<= 0`` means the
inequality held after subtracting its documented allowance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.optimize import minimize

from .core import (
    BivariateObjective,
    GridMismatch,
    NonpositiveLambda,
    NotDifferentiable,
    ProductPoint,
    extended_sum,
)
from .hilbert import BACKEND as HILBERT, QuadraticSaddleObjective, hilbert_point
from .saddle import Box
from .scheme import FlowTrajectory

SAMPLED_RADII = (1e-2, 1e-3, 1e-4)
SAMPLED_DIRECTIONS = 64
SLOPE_MODES = ("exact-smooth", "exact", "sampled")


# ---------------------------------------------------------------- NI gap


def ni_gap(obj: BivariateObjective, z: ProductPoint,
           feasible_box: tuple[Box, Box] | None = None) -> float:
    """Nikaido-Isoda gap ``sup_{x', y'} phi(x, y') - phi(x', y)``.

    The supremum runs over the objective's natural sets (the whole space for
    Hilbert objectives, the simplices for grid measures), intersected with
    ``feasible_box`` when given. Unbounded suprema give ``inf``.
    """
    if hasattr(obj, "ni_gap"):
        return float(obj.ni_gap(z, feasible_box))
    if hasattr(obj, "saddle_problem"):
        from .saddle import restricted_ni_gap
        return float(restricted_ni_gap(obj.saddle_problem(z.x, z.y), z))
    raise TypeError(f"{type(obj).__name__} exposes no Nikaido-Isoda gap")


# ---------------------------------------------------------------- slopes


def _crossed_quotient(obj: BivariateObjective, z: ProductPoint, w: ProductPoint) -> float:
    """``(phi(x, y') - phi(x', y)) / d_Z(z, w)``; ``-inf`` off the domain."""
    d = obj.metric.dist_z(z, w)
    if d == 0:
        return -math.inf
    if not (obj.in_domain_x(w.x) and obj.in_domain_y(w.y)):
        return -math.inf
    num = extended_sum(obj.evaluate(z.x, w.y), -obj.evaluate(w.x, z.y))
    return num / d


def local_slope(obj: BivariateObjective, z: ProductPoint, mode: str = "exact-smooth",
                seed: int = 0) -> float:
    """Modified local slope ``limsup (phi(x, y') - phi(x', y))^+ / d_Z``.

    Parameters
    ----------
    mode : {"exact-smooth", "exact", "sampled"}
        ``"exact-smooth"`` is the norm of the partial gradients and raises
        :class:`NotDifferentiable` at kinks. ``"exact"`` asks the backend
        (minimal-norm subgradient for composite objectives, transport slope
        for grid measures). ``"sampled"`` maximizes the quotient over radii
        ``1e-2, 1e-3, 1e-4`` and 64 random directions each; the result is a
        lower estimate of the limsup.
    """
    if mode == "exact-smooth":
        if not hasattr(obj, "partial_gradients"):
            raise NotDifferentiable(f"{type(obj).__name__} exposes no gradients")
        gx, gy = obj.partial_gradients(z)
        gx, gy = np.ravel(gx), np.ravel(gy)
        return float(math.sqrt(gx @ gx + gy @ gy))
    if mode == "exact":
        return float(obj.local_slope(z))
    if mode == "sampled":
        return _sampled_local_slope(obj, z, seed)
    raise ValueError(f"unknown slope mode {mode!r}; expected one of {SLOPE_MODES}")


def _sampled_local_slope(obj: BivariateObjective, z: ProductPoint, seed: int) -> float:
    rng = np.random.default_rng(seed)
    best = 0.0
    if obj.backend == HILBERT:
        x, y = np.atleast_1d(z.x), np.atleast_1d(z.y)
        d1 = x.size
        for r in SAMPLED_RADII:
            u = rng.standard_normal((SAMPLED_DIRECTIONS, d1 + y.size))
            u /= np.linalg.norm(u, axis=1, keepdims=True)
            for row in u:
                w = hilbert_point(x + r * row[:d1], y + r * row[d1:])
                best = max(best, _crossed_quotient(obj, z, w))
        return best
    # other backends: move along the backend's own curves toward random points
    curves = obj.curve_provider()
    for r in SAMPLED_RADII:
        for _ in range(SAMPLED_DIRECTIONS):
            tx, ty = curves.sample_x(rng), curves.sample_y(rng)
            w = obj.point(curves.interp_x(z.x, tx, r), curves.interp_y(z.y, ty, r))
            best = max(best, _crossed_quotient(obj, z, w))
    return best


def _global_quotient(obj, z, w, lam) -> float:
    q = _crossed_quotient(obj, z, w)
    return q + 0.5 * lam * obj.metric.dist_z(z, w)


def global_slope(obj: BivariateObjective, z: ProductPoint, lam: float | None = None,
                 search_box: tuple[Box, Box] | None = None, method: str = "auto",
                 seed: int = 0, starts: int = 16) -> float:
    """Global slope ``sup_{z' != z} ((phi(x, y') - phi(x', y))/d + lam d / 2)^+``.

    Parameters
    ----------
    method : {"auto", "closed-form", "search"}
        ``"closed-form"`` (quadratic objectives without a box) uses that the
        radial profile along any direction is affine in the radius with slope
        ``(lam - q(w))/2 <= 0``, so each direction peaks as the radius shrinks
        and the supremum is the gradient norm. ``"search"`` maximizes the
        radial profile over directions numerically (quadratics) or samples
        points in the box and along the backend curves (otherwise); the
        result is then a certified lower bound. ``"auto"`` picks the first
        applicable.
    """
    lam = obj.modulus.lam if lam is None else float(lam)
    quad = isinstance(obj, QuadraticSaddleObjective)
    if method == "auto":
        method = "closed-form" if quad and search_box is None else "search"
    if method == "closed-form":
        if not quad or search_box is not None:
            raise ValueError("closed form needs an unboxed quadratic objective")
        H = np.block([[obj.A, np.zeros_like(obj.C)], [np.zeros_like(obj.C.T), obj.B]])
        if lam > np.linalg.eigvalsh(H)[0] + 1e-12:
            return math.inf
        return local_slope(obj, z, "exact-smooth")
    if method != "search":
        raise ValueError(f"unknown method {method!r}")
    if quad:
        return _quadratic_direction_search(obj, z, lam, search_box, seed, starts)
    return _sampled_global_slope(obj, z, lam, search_box, seed)


def _radial_reach(z: ProductPoint, w: np.ndarray, d1: int, box: tuple[Box, Box] | None) -> float:
    """Largest ``r`` with ``z + r w`` inside the box (``inf`` without one)."""
    if box is None:
        return math.inf
    pos = np.concatenate([np.atleast_1d(z.x), np.atleast_1d(z.y)])
    lo = np.concatenate([np.broadcast_to(box[0].lo, (d1,)), np.broadcast_to(box[1].lo, (pos.size - d1,))])
    hi = np.concatenate([np.broadcast_to(box[0].hi, (d1,)), np.broadcast_to(box[1].hi, (pos.size - d1,))])
    with np.errstate(divide="ignore", invalid="ignore"):
        lim = np.where(w > 0, (hi - pos) / w, np.where(w < 0, (lo - pos) / w, math.inf))
    return float(max(np.min(lim), 0.0))


def _quadratic_direction_search(obj: QuadraticSaddleObjective, z: ProductPoint, lam: float,
                                box, seed: int, starts: int) -> float:
    """Maximize the radial supremum over unit directions.

    Along ``z + r w`` the quotient equals ``lin(w) + r (lam - q(w)) / 2`` with
    ``lin(w) = grad_y . w_y - grad_x . w_x`` and ``q(w) = w_x A w_x + w_y B w_y``,
    so the radial supremum is ``lin(w)`` when ``q(w) >= lam`` and the value at
    the box edge otherwise.
    """
    d1, d2 = obj.dims
    gx, gy = obj.partial_gradients(z)
    lin_vec = np.concatenate([-gx, gy])

    def radial(w):
        lin = float(lin_vec @ w)
        q = float(w[:d1] @ obj.A @ w[:d1] + w[d1:] @ obj.B @ w[d1:])
        if q >= lam - 1e-12 * (1.0 + abs(lam)):
            return lin
        reach = _radial_reach(z, w, d1, box)
        return lin + 0.5 * reach * (lam - q)

    def neg(v):
        n = np.linalg.norm(v)
        return -radial(v / n) if n > 0 else 0.0

    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(starts):
        v0 = rng.standard_normal(d1 + d2)
        res = minimize(neg, v0, method="BFGS", options={"gtol": 1e-12})
        best = max(best, -float(res.fun), -neg(v0))
    return best


def _sampled_global_slope(obj, z, lam, box, seed, samples: int = 256) -> float:
    rng = np.random.default_rng(seed)
    best = 0.0
    if obj.backend == HILBERT:
        if box is None:
            raise ValueError("sampled global slope on a Hilbert backend needs a search box")
        x, y = np.atleast_1d(z.x), np.atleast_1d(z.y)
        for _ in range(samples):
            wx = rng.uniform(np.broadcast_to(box[0].lo, x.shape), np.broadcast_to(box[0].hi, x.shape))
            wy = rng.uniform(np.broadcast_to(box[1].lo, y.shape), np.broadcast_to(box[1].hi, y.shape))
            for s in (1.0, 0.1, 0.01, 1e-3):
                w = hilbert_point(x + s * (wx - x), y + s * (wy - y))
                best = max(best, _global_quotient(obj, z, w, lam))
        return best
    curves = obj.curve_provider()
    for _ in range(samples):
        tx, ty = curves.sample_x(rng), curves.sample_y(rng)
        for s in (1.0, 0.1, 0.01, 1e-3):
            w = obj.point(curves.interp_x(z.x, tx, s), curves.interp_y(z.y, ty, s))
            best = max(best, _global_quotient(obj, z, w, lam))
    return best


# ---------------------------------------------------------------- trajectory checks


def _check_grids(a: FlowTrajectory, b: FlowTrajectory) -> None:
    if len(a.times) != len(b.times) or not np.array_equal(a.times, b.times):
        raise GridMismatch("trajectories must share the same time grid")


def _uniform_step(traj: FlowTrajectory) -> float:
    t = np.asarray(traj.times, dtype=float)
    if t.size < 2:
        return 0.0
    h = np.diff(t)
    if np.max(np.abs(h - h[0])) > 1e-9 * max(1.0, abs(h[0])):
        raise GridMismatch("trajectory times must be uniform")
    return float(h[0])


def pair_distances_sq(traj0: FlowTrajectory, traj1: FlowTrajectory) -> np.ndarray:
    _check_grids(traj0, traj1)
    met = _metric_of(traj0)
    return np.array([met.dist_z_sq(a, b) for a, b in zip(traj0.points, traj1.points)])


def _metric_of(traj: FlowTrajectory):
    from .core import backend_metric
    return backend_metric(traj.points[0].backend)


def contraction_allowance(d_s: np.ndarray, decay: np.ndarray, err: float) -> np.ndarray:
    """Slack for flows known only up to distance ``err`` each.

    With computed distances ``d`` and true ones ``D`` satisfying
    ``|d - D| <= err`` and ``D_t <= e^{-lam (t-s)} D_s``, one gets
    ``d_t^2 - e^{-2 lam (t-s)} d_s^2 <= (e^{-lam (t-s)} (d_s + err) + err)^2
    - e^{-2 lam (t-s)} d_s^2``; ``decay`` holds ``e^{-lam (t-s)}``.
    """
    return (decay * (d_s + err) + err) ** 2 - (decay * d_s) ** 2


def check_contraction(traj0: FlowTrajectory, traj1: FlowTrajectory, lam: float,
                      error: float | None = None) -> float:
    """Signed contraction violation.

    ``max_{s<t} d_t^2 - e^{-2 lam (t-s)} d_s^2 - allowance(s, t)``. The
    allowance is the smaller of two valid slacks: the one of
    :func:`contraction_allowance` with ``error``, the summed distance error of
    the two trajectories to their exact flows (for scheme outputs, the two
    a-priori bounds; ``None`` means unknown), and, for scheme outputs sharing a step ``tau``,
    ``((1 + lam tau)^{-2k} - e^{-2 lam k tau}) d_s^2`` since each implicit
    step is ``1/(1 + lam tau)``-Lipschitz. Round-off is absorbed on top.
    """
    d2 = pair_distances_sq(traj0, traj1)
    d = np.sqrt(d2)
    t = np.asarray(traj0.times, dtype=float)
    tau = traj0.tau if traj0.tau and traj0.tau == traj1.tau else 0.0
    roundoff = 64 * np.finfo(float).eps * (1.0 + float(np.max(d2)))
    worst = -math.inf if len(t) > 1 else 0.0
    for i in range(len(t) - 1):
        decay = np.exp(-lam * (t[i + 1:] - t[i]))
        allow = np.full(decay.shape, math.inf if tau else 0.0)
        if error is not None:
            allow = contraction_allowance(d[i], decay, error)
        if tau:
            k = np.round((t[i + 1:] - t[i]) / tau)
            allow = np.minimum(allow, ((1 + lam * tau) ** (-2 * k) - decay ** 2) * d2[i])
        v = d2[i + 1:] - decay ** 2 * d2[i] - allow
        worst = max(worst, float(np.max(v)))
    if 0 < worst <= roundoff:
        return 0.0
    return worst


def contraction_ratios(traj0: FlowTrajectory, traj1: FlowTrajectory) -> np.ndarray:
    """``d_Z^2(w_t^0, w_t^1) / d_Z^2(w_0^0, w_0^1)``."""
    d2 = pair_distances_sq(traj0, traj1)
    if d2[0] == 0:
        return np.zeros_like(d2)
    return d2 / d2[0]


@dataclass(frozen=True)
class EviCheck:
    """Worst signed violations of the two integral inequalities."""

    x_violation: float
    y_violation: float
    allowance_rate: tuple[float, float] = (0.0, 0.0)

    @property
    def max_violation(self) -> float:
        return max(self.x_violation, self.y_violation)


def _worst_increment(G: np.ndarray, t: np.ndarray, rate: float) -> float:
    """``max_{s<t} (G_t - G_s) - rate (t - s)`` in one pass."""
    H = G - rate * t
    running_min = np.minimum.accumulate(H[:-1])
    return float(np.max(H[1:] - running_min))


def check_evi_integral(obj: BivariateObjective, traj: FlowTrajectory, lam: float | None,
                       test_points: Sequence[ProductPoint], implicit: bool | None = None) -> EviCheck:
    """Integral evolution variational inequalities along a trajectory.

    For each test point ``(x, y)`` and grid interval ``[s, t]`` evaluates
    ``1/2 (d^2(u_t, x) - d^2(u_s, x)) - int_s^t phi(x, v_r) - phi(u_r, v_r)
    - lam/2 d^2(u_r, x) dr`` and its mirror in ``y``, with the trapezoidal
    rule on the trajectory's own grid.

    Allowance per interval is ``(t - s) max|second difference| / 8`` of the
    integrand. When ``implicit`` (default: the trajectory records a step
    size) the points come from implicit steps, which satisfy the
    inequalities with the right-endpoint rule; the gap to the trapezoidal
    rule adds ``(t - s) max|first difference| / 2``.
    """
    lam = obj.modulus.lam if lam is None else float(lam)
    h = _uniform_step(traj)
    t = np.asarray(traj.times, dtype=float)
    if t.size < 2:
        return EviCheck(0.0, 0.0)
    implicit = bool(traj.tau) if implicit is None else implicit
    met = obj.metric
    us = [p.x for p in traj.points]
    vs = [p.y for p in traj.points]
    phi_w = np.array([obj.evaluate(u, v) for u, v in zip(us, vs)])
    worst = [-math.inf, -math.inf]
    rates = [0.0, 0.0]
    for p in test_points:
        dx = np.array([met.dist_x(u, p.x) ** 2 for u in us])
        dy = np.array([met.dist_y(v, p.y) ** 2 for v in vs])
        fx = np.array([obj.evaluate(p.x, v) for v in vs]) - phi_w - 0.5 * lam * dx
        fy = phi_w - np.array([obj.evaluate(u, p.y) for u in us]) - 0.5 * lam * dy
        for k, (dist, f) in enumerate(((dx, fx), (dy, fy))):
            integral = np.concatenate([[0.0], np.cumsum(0.5 * h * (f[1:] + f[:-1]))])
            G = 0.5 * dist - integral
            rate = float(np.max(np.abs(np.diff(f, 2)))) / 8 if f.size > 2 else 0.0
            if implicit:
                rate += float(np.max(np.abs(np.diff(f)))) / 2
            rates[k] = max(rates[k], rate)
            worst[k] = max(worst[k], _worst_increment(G, t, rate))
    return EviCheck(worst[0], worst[1], (rates[0], rates[1]))


@dataclass(frozen=True)
class DecayCertificate:
    """Nikaido-Isoda decay check from a base index ``s``.

    ``bound`` is ``e^{-2 lam (t - s)} |slope|^2(w_s) / (2 lam)``, ``allowance``
    the implicit-scheme slack and ``violation`` the worst signed excess.
    """

    times: np.ndarray
    ni: np.ndarray
    bound: np.ndarray
    allowance: np.ndarray
    violation: float

    @property
    def ratio(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.bound > 0, self.ni / self.bound, 0.0)


def ni_decay_certificate(obj: BivariateObjective, traj: FlowTrajectory, lam: float,
                         s_index: int = 0, feasible_box=None, slope_mode: str = "exact",
                         ni_values: np.ndarray | None = None) -> DecayCertificate:
    """Check ``NI(w_t) <= e^{-2 lam (t-s)} |slope|^2(w_s) / (2 lam)``.

    Implicit steps shrink the slope by ``1/(1 + lam tau)`` instead of
    ``e^{-lam tau}``, so for scheme outputs the allowance is the gap between
    ``(1 + lam tau)^{-2k}`` and ``e^{-2 lam k tau}`` times the same prefactor.
    """
    if not lam > 0:
        raise NonpositiveLambda(f"decay certificate needs lambda > 0, got {lam}")
    t = np.asarray(traj.times, dtype=float)[s_index:]
    pts = traj.points[s_index:]
    s0 = local_slope(obj, pts[0], slope_mode)
    ni = (np.asarray(ni_values, dtype=float)[s_index:] if ni_values is not None
          else np.array([ni_gap(obj, p, feasible_box) for p in pts]))
    pref = s0 * s0 / (2 * lam)
    bound = pref * np.exp(-2 * lam * (t - t[0]))
    if traj.tau:
        k = np.round((t - t[0]) / traj.tau)
        allowance = pref * ((1 + lam * traj.tau) ** (-2 * k)) - bound
    else:
        allowance = np.zeros_like(bound)
    excess = ni - bound - allowance
    violation = float(np.max(excess[1:])) if t.size > 1 else 0.0
    return DecayCertificate(t, ni, bound, allowance, violation)


def slope_monotonicity_check(obj: BivariateObjective, traj: FlowTrajectory, lam: float,
                             slope_mode: str = "exact",
                             slopes: np.ndarray | None = None) -> float:
    """Worst ``e^{lam t_{k+1}} s_{k+1} - e^{lam t_k} s_k`` minus its allowance.

    Implicit steps satisfy ``s_{k+1} <= s_k / (1 + lam tau)``, so the
    allowance is ``e^{lam t_k} s_k (e^{lam tau}/(1 + lam tau) - 1)``.
    """
    t = np.asarray(traj.times, dtype=float)
    s = (np.asarray(slopes, dtype=float) if slopes is not None
         else np.array([local_slope(obj, p, slope_mode) for p in traj.points]))
    if t.size < 2:
        return 0.0
    e = np.exp(lam * t) * s
    diffs = np.diff(e)
    if traj.tau:
        allow = e[:-1] * (math.exp(lam * traj.tau) / (1 + lam * traj.tau) - 1.0)
    else:
        allow = np.zeros_like(diffs)
    roundoff = 64 * np.finfo(float).eps * np.maximum(e[:-1], e[1:])
    return float(np.max(diffs - allow - roundoff))


def slope_chain_residuals(obj: BivariateObjective, traj: FlowTrajectory, lam: float | None = None,
                          slope_mode: str = "exact-smooth") -> np.ndarray:
    """Per-step residuals of ``d(Jz, z)/tau <= s(z)/(1 + lam tau)`` and ``s(Jz) <= d(Jz, z)/tau``.

    Returns an array of shape ``(steps, 2)``; nonpositive entries hold.
    """
    lam = obj.modulus.lam if lam is None else float(lam)
    tau = traj.tau
    met = obj.metric
    s = np.array([local_slope(obj, p, slope_mode) for p in traj.points])
    out = np.empty((len(traj.points) - 1, 2))
    for k in range(len(traj.points) - 1):
        speed = met.dist_z(traj.points[k + 1], traj.points[k]) / tau
        out[k, 0] = speed - s[k] / (1 + lam * tau)
        out[k, 1] = s[k + 1] - speed
    return out


# ---------------------------------------------------------------- report

ROW_FIELDS = ("t", "ni_gap", "local_slope", "global_slope", "dist_to_saddle",
              "contraction_ratio", "evi_residual_max", "ni_bound")


@dataclass
class DiagnosticsReport:
    """Per-time diagnostics aligned with a trajectory plus worst violations.

    Missing entries are ``nan``. ``summary`` maps a check name to its worst
    signed violation (``<= 0`` means satisfied).
    """

    columns: dict[str, np.ndarray]
    summary: dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.columns["t"])

    def rows(self):
        for k in range(len(self)):
            yield tuple(float(self.columns[f][k]) for f in ROW_FIELDS)

    @property
    def worst_violation(self) -> float:
        vals = [v for v in self.summary.values() if isinstance(v, float) and not math.isnan(v)]
        return max(vals) if vals else 0.0


def evi_step_residuals(obj: BivariateObjective, traj: FlowTrajectory,
                       test_points: Sequence[ProductPoint], lam: float | None = None) -> np.ndarray:
    """Worst one-step variational-inequality residual for each step (row 0 is ``nan``)."""
    from .scheme import discrete_evi_residuals
    out = np.full(len(traj.points), math.nan)
    for k in range(1, len(traj.points)):
        r = discrete_evi_residuals(obj, traj.points[k - 1], traj.points[k], traj.tau, test_points, lam)
        out[k] = float(np.max(r))
    return out


def build_report(obj: BivariateObjective, traj: FlowTrajectory, lam: float | None = None,
                 saddle: ProductPoint | None = None, companion: FlowTrajectory | None = None,
                 test_points: Sequence[ProductPoint] = (), feasible_box=None,
                 slope_mode: str = "exact", global_slopes: bool = True,
                 error: float | None = None) -> DiagnosticsReport:
    """Run every applicable checker on one trajectory.

    ``companion`` (a second trajectory on the same grid) enables the
    contraction column; otherwise the saddle point, a stationary flow, plays
    that role when known.
    """
    lam = obj.modulus.lam if lam is None else float(lam)
    n = len(traj.points)
    t = np.asarray(traj.times, dtype=float)
    nan = np.full(n, math.nan)
    ni = np.array([ni_gap(obj, p, feasible_box) for p in traj.points])
    slopes = np.array([local_slope(obj, p, slope_mode) for p in traj.points])
    gslopes = (np.array([global_slope(obj, p, lam) for p in traj.points])
               if global_slopes else nan.copy())
    met = obj.metric
    dist = np.array([met.dist_z(p, saddle) for p in traj.points]) if saddle is not None else nan.copy()
    summary: dict[str, Any] = {}
    other = companion
    if other is None and saddle is not None:
        other = FlowTrajectory(traj.times, tuple(saddle for _ in traj.points), traj.tau)
    if other is not None:
        ratio = contraction_ratios(traj, other)
        summary["contraction"] = check_contraction(traj, other, lam, error)
    else:
        ratio = nan.copy()
    evi = evi_step_residuals(obj, traj, test_points, lam) if test_points and traj.tau else nan.copy()
    if test_points and traj.tau:
        summary["discrete_evi"] = float(np.nanmax(evi)) if n > 1 else 0.0
        summary["evi_integral"] = check_evi_integral(obj, traj, lam, test_points).max_violation
    if lam > 0:
        cert = ni_decay_certificate(obj, traj, lam, 0, feasible_box, slope_mode, ni_values=ni)
        bound = cert.bound
        summary["ni_decay"] = cert.violation
    else:
        bound = nan.copy()
    summary["slope_monotonicity"] = slope_monotonicity_check(obj, traj, lam, slopes=slopes)
    if global_slopes and isinstance(obj, QuadraticSaddleObjective):
        summary["local_global_gap"] = float(np.max(np.abs(gslopes - slopes) / (1 + slopes)))
    columns = dict(zip(ROW_FIELDS, (t, ni, slopes, gslopes, dist, ratio, evi, bound)))
    return DiagnosticsReport(columns, summary)
