"""Certified solvers for strongly convex-concave saddle problems.

The production path is extragradient (Euclidean factors) or mirror-prox
(simplex factors). A nested "maximize the marginal" solver for one-dimensional
``y`` serves as an independent oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy.optimize import minimize_scalar

from .core import GdaflowError, Infeasible, NoConvergence, NotStronglyConvexConcave, ProductPoint

Vector = np.ndarray


class OuterDimensionTooLarge(GdaflowError, ValueError):
    pass


# -------------------------------------------------------------- feasible sets


@dataclass(frozen=True)
class Whole:
    """The whole Euclidean space."""

    def contains(self, v: Vector) -> bool:
        return bool(np.all(np.isfinite(v)))

    def project(self, v: Vector) -> Vector:
        return v


@dataclass(frozen=True)
class Box:
    """Coordinate box ``[lo, hi]`` (bounds broadcast against the vector)."""

    lo: Any
    hi: Any

    def contains(self, v: Vector) -> bool:
        return bool(np.all(v >= np.asarray(self.lo) - 1e-12) and np.all(v <= np.asarray(self.hi) + 1e-12))

    def project(self, v: Vector) -> Vector:
        return np.clip(v, self.lo, self.hi)


@dataclass(frozen=True)
class Simplex:
    """Probability simplex, handled in the entropic (mirror) geometry."""

    def contains(self, v: Vector) -> bool:
        return bool(np.all(v >= -1e-12) and abs(v.sum() - 1.0) <= 1e-9)

    def project(self, v: Vector) -> Vector:
        v = np.clip(v, 0.0, None)
        return v / v.sum()


FeasibleSet = Whole | Box | Simplex


# ------------------------------------------------------------------- problems


@dataclass(frozen=True)
class SaddleProblem:
    """A strongly convex-concave problem ``min_x max_y value(x, y)``.

    Parameters
    ----------
    value, grad_x, grad_y : callables of ``(x, y)``
        Smooth part and its partial gradients.
    lam : float
        Declared modulus of strong convex-concavity (must be positive).
    x0, y0 : arrays
        Starting point.
    set_x, set_y : Whole, Box or Simplex
    prox_x, prox_y : callables ``(v, eta) -> v'``, optional
        Proximal maps of nonsmooth convex parts ``f`` (added in ``x``) and
        ``g`` (subtracted in ``y``). ``value`` must include them.
    gap : callable ``(x, y) -> float``, optional
        Exact or certified gap. Used for stopping and reporting.
    lipschitz : float, optional
        Known Lipschitz (or relative smoothness) constant of the gradient
        field; sampled when absent.
    argmin_x : callable ``y -> x``, optional
        Exact inner minimizer, used by :func:`nested_saddle`.
    """

    value: Callable[[Vector, Vector], float]
    grad_x: Callable[[Vector, Vector], Vector]
    grad_y: Callable[[Vector, Vector], Vector]
    lam: float
    x0: Vector
    y0: Vector
    set_x: FeasibleSet = field(default_factory=Whole)
    set_y: FeasibleSet = field(default_factory=Whole)
    prox_x: Callable[[Vector, float], Vector] | None = None
    prox_y: Callable[[Vector, float], Vector] | None = None
    gap: Callable[[Vector, Vector], float] | None = None
    lipschitz: float | None = None
    argmin_x: Callable[[Vector], Vector] | None = None


@dataclass(frozen=True)
class SaddleCertificate:
    """Approximate saddle point with a certified restricted gap."""

    point: ProductPoint
    gap: float
    iterations: int
    method: str
    gap_history: tuple = field(default=(), repr=False, compare=False)


# -------------------------------------------------------------------- helpers


def _descent(set_: FeasibleSet, prox, v: Vector, g: Vector, eta: float) -> Vector:
    """One proximal/mirror step ``v - eta g`` in the geometry of ``set_``."""
    if isinstance(set_, Simplex):
        logs = np.log(np.maximum(v, 1e-300)) - eta * g
        logs -= logs.max()
        w = np.exp(logs)
        return w / w.sum()
    out = v - eta * g
    if prox is not None:
        out = prox(out, eta)
    return set_.project(out)


def _field_norm_ratio(problem: SaddleProblem, rng: np.random.Generator, samples: int = 8) -> float:
    x0 = np.asarray(problem.x0, dtype=float)
    y0 = np.asarray(problem.y0, dtype=float)

    def F(x, y):
        return np.concatenate([problem.grad_x(x, y), -np.asarray(problem.grad_y(x, y))])

    def perturb(v, set_):
        if isinstance(set_, Simplex):
            d = rng.dirichlet(np.ones(v.size))
            return set_.project(0.5 * v + 0.5 * d)
        return set_.project(v + rng.standard_normal(v.size))

    best = 0.0
    for _ in range(samples):
        xa, ya = perturb(x0, problem.set_x), perturb(y0, problem.set_y)
        xb, yb = perturb(x0, problem.set_x), perturb(y0, problem.set_y)
        dz = math.sqrt(np.sum((xa - xb) ** 2) + np.sum((ya - yb) ** 2))
        if dz > 0:
            best = max(best, float(np.linalg.norm(F(xa, ya) - F(xb, yb))) / dz)
    return best


def estimate_lipschitz(problem: SaddleProblem, seed: int = 0) -> float:
    """Sampled Lipschitz ratio of the gradient field times a safety factor 2."""
    if problem.lipschitz is not None:
        return float(problem.lipschitz)
    return 2.0 * max(_field_norm_ratio(problem, np.random.default_rng(seed)), 1e-12)


def _certificate_gap(problem: SaddleProblem, x: Vector, y: Vector, eta: float):
    """Certified gap at a point derived from ``(x, y)``.

    Euclidean factors: one forward-backward step to ``z+`` yields an element
    ``v`` of the (sub/super)differential at ``z+`` and the strong modulus gives
    ``gap(z+) <= |v|^2 / (2 lam)``. Simplex factors: the linearization gap at
    ``(x, y)`` itself. A user gap function overrides both.
    """
    if problem.gap is not None:
        return x, y, float(problem.gap(x, y))
    gx, gy = problem.grad_x(x, y), problem.grad_y(x, y)
    simplex_x = isinstance(problem.set_x, Simplex)
    simplex_y = isinstance(problem.set_y, Simplex)
    if simplex_x and simplex_y:
        gap = float(x @ gx - gx.min() + gy.max() - y @ gy)
        return x, y, max(gap, 0.0)
    if simplex_x or simplex_y:
        raise NotImplementedError("mixed simplex/Euclidean certificates are not supported")
    xp = _descent(problem.set_x, problem.prox_x, x, gx, eta)
    yp = _descent(problem.set_y, problem.prox_y, y, -gy, eta)
    vx = problem.grad_x(xp, yp) - gx + (x - xp) / eta
    vy = problem.grad_y(xp, yp) - gy - (y - yp) / eta
    return xp, yp, float((vx @ vx + vy @ vy) / (2.0 * problem.lam))


# --------------------------------------------------------------------- solvers


def solve_saddle(problem: SaddleProblem, tol: float = 1e-10, max_iter: int = 100_000) -> SaddleCertificate:
    """Extragradient / mirror-prox with a fixed step ``1 / (2 L)``.

    Parameters
    ----------
    problem : SaddleProblem
    tol : float
        Target certified gap.
    max_iter : int

    Returns
    -------
    SaddleCertificate

    Raises
    ------
    NotStronglyConvexConcave
        If ``problem.lam <= 0``.
    NoConvergence
        With the best certificate when the budget is exhausted.
    """
    if not problem.lam > 0:
        raise NotStronglyConvexConcave(f"declared modulus {problem.lam} is not positive")
    method = "mirror-prox" if isinstance(problem.set_x, Simplex) else "extragradient"
    eta = 1.0 / (2.0 * estimate_lipschitz(problem))
    x = problem.set_x.project(np.array(problem.x0, dtype=float))
    y = problem.set_y.project(np.array(problem.y0, dtype=float))
    best = None
    history = []
    for it in range(max_iter + 1):
        cx, cy, gap = _certificate_gap(problem, x, y, eta)
        history.append(gap)
        if best is None or gap < best[2]:
            best = (cx, cy, gap, it)
        if gap <= tol:
            break
        if it == max_iter:
            break
        gx, gy = problem.grad_x(x, y), problem.grad_y(x, y)
        xh = _descent(problem.set_x, problem.prox_x, x, gx, eta)
        yh = _descent(problem.set_y, problem.prox_y, y, -gy, eta)
        gx, gy = problem.grad_x(xh, yh), problem.grad_y(xh, yh)
        x = _descent(problem.set_x, problem.prox_x, x, gx, eta)
        y = _descent(problem.set_y, problem.prox_y, y, -gy, eta)
    bx, by, bgap, bit = best
    cert = SaddleCertificate(ProductPoint(bx, by, "hilbert"), bgap, bit, method, tuple(history))
    if not bgap <= tol:
        raise NoConvergence(f"{method}: gap {bgap:.3e} above tol {tol:.1e} after {max_iter} iterations",
                            best=cert, gap=bgap, iterations=max_iter)
    return cert


def _inner_min(problem: SaddleProblem, y: Vector, x_start: Vector, tol: float) -> Vector:
    if problem.argmin_x is not None:
        return np.asarray(problem.argmin_x(y), dtype=float)
    eta = 1.0 / (2.0 * estimate_lipschitz(problem))
    x = x_start
    for _ in range(200_000):
        xn = _descent(problem.set_x, problem.prox_x, x, problem.grad_x(x, y), eta)
        if np.linalg.norm(xn - x) <= tol * eta:
            return xn
        x = xn
    return x


def nested_saddle(problem: SaddleProblem, tol: float = 1e-10,
                  y_bounds: tuple[float, float] | None = None) -> SaddleCertificate:
    """Two-level oracle: ``y* = argmax_y inf_x phi(x, y)``, then ``x* = x*(y*)``.

    Only a one-dimensional ``y`` is supported. The outer concave maximization
    uses Brent's method (bounded when ``set_y`` is a box or ``y_bounds`` is
    given); each outer evaluation runs a strongly convex inner minimization.
    """
    y0 = np.atleast_1d(np.asarray(problem.y0, dtype=float))
    if y0.size != 1:
        raise OuterDimensionTooLarge("nested_saddle supports one-dimensional y only")
    if not problem.lam > 0:
        raise NotStronglyConvexConcave(f"declared modulus {problem.lam} is not positive")
    state = {"x": np.array(problem.x0, dtype=float), "evals": 0}

    def neg_marginal(t: float) -> float:
        y = np.array([t])
        x = _inner_min(problem, y, state["x"], tol * 1e-2)
        state["x"] = x
        state["evals"] += 1
        return -float(problem.value(x, y))

    if isinstance(problem.set_y, Box) and y_bounds is None:
        y_bounds = (float(np.min(problem.set_y.lo)), float(np.max(problem.set_y.hi)))
    if y_bounds is not None:
        res = minimize_scalar(neg_marginal, bounds=y_bounds, method="bounded",
                              options={"xatol": max(tol, 1e-12), "maxiter": 1000})
    else:
        c = float(y0[0])
        res = minimize_scalar(neg_marginal, bracket=(c - 1.0, c + 1.0), method="brent",
                              options={"xtol": max(tol, 1e-12), "maxiter": 1000})
    ystar = np.array([res.x])
    xstar = _inner_min(problem, ystar, state["x"], tol * 1e-2)
    point = ProductPoint(xstar, ystar, "hilbert")
    gap = restricted_ni_gap(problem, point)
    return SaddleCertificate(point, gap, state["evals"], "nested")


def marginal_y(problem: SaddleProblem, y: Vector, tol: float = 1e-12) -> float:
    """``inf_x phi(x, y)`` by the inner strongly convex minimization."""
    x = _inner_min(problem, np.atleast_1d(y), np.array(problem.x0, dtype=float), tol)
    return float(problem.value(x, np.atleast_1d(y)))


def restricted_ni_gap(problem: SaddleProblem, z: ProductPoint, return_flag: bool = False):
    """``sup_{x', y'} value(x, y') - value(x', y)`` over the feasible sets.

    Uses ``problem.gap`` when available (exact). Otherwise each one-sided
    problem is solved by multi-start projected gradient, which yields a lower
    bound; ``return_flag=True`` returns ``(gap, exact)``.
    """
    x, y = np.asarray(z.x, dtype=float), np.asarray(z.y, dtype=float)
    if not (problem.set_x.contains(x) and problem.set_y.contains(y)):
        raise Infeasible("point outside the feasible sets")
    if problem.gap is not None:
        g = float(problem.gap(x, y))
        return (g, True) if return_flag else g
    eta = 1.0 / (2.0 * estimate_lipschitz(problem))
    rng = np.random.default_rng(0)
    hi = -math.inf
    lo = math.inf
    for k in range(4):
        ys = y if k == 0 else problem.set_y.project(y + rng.standard_normal(y.size))
        xs = x if k == 0 else problem.set_x.project(x + rng.standard_normal(x.size))
        for _ in range(20_000):
            yn = _descent(problem.set_y, problem.prox_y, ys, -problem.grad_y(x, ys), eta)
            xn = _descent(problem.set_x, problem.prox_x, xs, problem.grad_x(xs, y), eta)
            done = np.linalg.norm(yn - ys) + np.linalg.norm(xn - xs) <= 1e-14
            ys, xs = yn, xn
            if done:
                break
        hi = max(hi, float(problem.value(x, ys)))
        lo = min(lo, float(problem.value(xs, y)))
    g = max(hi - lo, 0.0)
    return (g, False) if return_flag else g
