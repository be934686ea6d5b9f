"""Finite-dimensional Euclidean backend.

Objectives have the form ``phi(x, y) = f(x) + smooth(x, y) - g(y)`` on
``R^d1 x R^d2``. The quadratic class has closed-form resolvents and an exact
linear flow; the composite class adds prox-capable convex terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .core import (
    BivariateObjective,
    ConvexityModulus,
    CurveProvider,
    GdaflowError,
    NoConvergence,
    NotDifferentiable,
    ProductMetric,
    ProductPoint,
    ResolventResult,
    register_backend,
)
from .saddle import Box, SaddleProblem, Whole, solve_saddle

BACKEND = "hilbert"
Vector = np.ndarray


class SingularSystem(GdaflowError, np.linalg.LinAlgError):
    pass


class DimensionTooLarge(GdaflowError, ValueError):
    pass


def _euclid(u, v) -> float:
    return float(np.linalg.norm(np.asarray(u, dtype=float) - np.asarray(v, dtype=float)))


register_backend(BACKEND, ProductMetric(_euclid, _euclid))


def hilbert_point(x, y) -> ProductPoint:
    """Product point with float vector components."""
    return ProductPoint(np.atleast_1d(np.asarray(x, dtype=float)),
                        np.atleast_1d(np.asarray(y, dtype=float)), BACKEND)


def smallest_eigenvalue(M: np.ndarray) -> float:
    """Smallest eigenvalue of a symmetric matrix (LAPACK ``syevd``)."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return math.inf
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])


def _segment(a, b, t):
    return (1.0 - t) * np.asarray(a) + t * np.asarray(b)


def gaussian_curves(d1: int, d2: int, scale: float = 1.0) -> CurveProvider:
    """Random Gaussian endpoints joined by straight segments."""
    return CurveProvider(
        sample_x=lambda rng: scale * rng.standard_normal(d1),
        sample_y=lambda rng: scale * rng.standard_normal(d2),
        interp_x=_segment, interp_y=_segment)


# ---------------------------------------------------------------- quadratic


@dataclass(frozen=True, eq=False)
class QuadraticSaddleObjective(BivariateObjective):
    """``phi(x, y) = x^T A x / 2 + a^T x + x^T C y - y^T B y / 2 - b^T y``.

    Parameters
    ----------
    A, B : symmetric matrices
    a, b : vectors
    C : coupling matrix, shape ``(d1, d2)``
    lam : float, optional
        Declared modulus; defaults to ``min(lambda_min(A), lambda_min(B))``
        and must not exceed it.
    """

    A: np.ndarray
    a: np.ndarray
    C: np.ndarray
    B: np.ndarray
    b: np.ndarray
    lam: float | None = None

    backend = BACKEND

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        d1, d2 = a.size, b.size
        if A.shape != (d1, d1) or B.shape != (d2, d2) or C.shape != (d1, d2):
            raise ValueError(f"inconsistent shapes A{A.shape} a{a.shape} C{C.shape} B{B.shape} b{b.shape}")
        for name, M in (("A", A), ("B", B)):
            if not np.allclose(M, M.T, rtol=0, atol=1e-12 * (1 + np.abs(M).max())):
                raise ValueError(f"{name} must be symmetric")
        bound = min(smallest_eigenvalue(A), smallest_eigenvalue(B))
        lam = bound if self.lam is None else float(self.lam)
        if lam > bound + 1e-8:
            raise ValueError(f"declared lambda {lam} exceeds min eigenvalue bound {bound}")
        for name, v in (("A", A), ("B", B), ("C", C), ("a", a), ("b", b)):
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        object.__setattr__(self, "lam", lam)

    @classmethod
    def scalar(cls, A=0.0, a=0.0, C=1.0, B=0.0, b=0.0, lam=None) -> "QuadraticSaddleObjective":
        return cls([[A]], [a], [[C]], [[B]], [b], lam)

    @property
    def dims(self) -> tuple[int, int]:
        return self.a.size, self.b.size

    @property
    def modulus(self) -> ConvexityModulus:  # type: ignore[override]
        return ConvexityModulus(self.lam)

    def evaluate(self, x, y) -> float:
        x, y = np.atleast_1d(x), np.atleast_1d(y)
        return float(0.5 * x @ self.A @ x + self.a @ x + x @ self.C @ y - 0.5 * y @ self.B @ y - self.b @ y)

    def grid_values(self, xs: Vector, ys: Vector) -> np.ndarray:
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        A, a, C, B, b = (float(self.A[0, 0]), float(self.a[0]), float(self.C[0, 0]),
                         float(self.B[0, 0]), float(self.b[0]))
        return 0.5 * A * X * X + a * X + C * X * Y - 0.5 * B * Y * Y - b * Y

    def decomposition(self):
        return (lambda x, y: float(np.atleast_1d(x) @ self.C @ np.atleast_1d(y)),
                lambda x: float(0.5 * x @ self.A @ x + self.a @ x),
                lambda y: float(-0.5 * y @ self.B @ y - self.b @ y))

    def grad_x(self, x, y) -> Vector:
        return self.A @ x + self.a + self.C @ y

    def grad_y(self, x, y) -> Vector:
        return self.C.T @ x - self.B @ y - self.b

    def partial_gradients(self, z: ProductPoint) -> tuple[Vector, Vector]:
        return self.grad_x(z.x, z.y), self.grad_y(z.x, z.y)

    def local_slope(self, z: ProductPoint) -> float:
        gx, gy = self.partial_gradients(z)
        return float(math.sqrt(gx @ gx + gy @ gy))

    def saddle_point(self) -> ProductPoint:
        d1, d2 = self.dims
        K = np.block([[self.A, self.C], [self.C.T, -self.B]])
        rhs = np.concatenate([-self.a, self.b])
        try:
            sol = np.linalg.solve(K, rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularSystem("saddle system is singular") from exc
        return hilbert_point(sol[:d1], sol[d1:])

    # exact one-sided extrema ---------------------------------------------------
    def _concave_sup(self, H: np.ndarray, g: Vector, box: Box | None) -> float:
        """``sup_v g^T v - v^T H v / 2`` over R^d or a box (H positive semidefinite)."""
        if box is None:
            v, *_ = np.linalg.lstsq(H, g, rcond=None)
            if np.linalg.norm(H @ v - g) > 1e-10 * (1.0 + np.linalg.norm(g)):
                return math.inf
            return float(0.5 * g @ v)
        lo = np.broadcast_to(np.asarray(box.lo, dtype=float), g.shape)
        hi = np.broadcast_to(np.asarray(box.hi, dtype=float), g.shape)
        if g.size == 1:
            h, gg = float(H[0, 0]), float(g[0])
            cands = [lo[0], hi[0]] + ([gg / h] if h > 0 else [])
            return max(gg * c - 0.5 * h * c * c for c in cands if lo[0] <= c <= hi[0])
        res = minimize(lambda v: (0.5 * v @ H @ v - g @ v, H @ v - g), x0=np.clip(np.zeros_like(g), lo, hi),
                       jac=True, method="L-BFGS-B", bounds=list(zip(lo, hi)),
                       options={"ftol": 1e-16, "gtol": 1e-13, "maxiter": 10_000})
        return float(-res.fun)

    def sup_y(self, x: Vector, box: Box | None = None) -> float:
        base = float(0.5 * x @ self.A @ x + self.a @ x)
        return base + self._concave_sup(self.B, self.C.T @ x - self.b, box)

    def inf_x(self, y: Vector, box: Box | None = None) -> float:
        base = float(-0.5 * y @ self.B @ y - self.b @ y)
        return base - self._concave_sup(self.A, -(self.a + self.C @ y), box)

    def ni_gap(self, z: ProductPoint, feasible_box: tuple[Box, Box] | None = None) -> float:
        """Exact gap ``sup phi(x, .) - inf phi(., y)``, ``inf`` when unbounded."""
        bx, by = (None, None) if feasible_box is None else feasible_box
        hi = self.sup_y(z.x, by)
        lo = self.inf_x(z.y, bx)
        if math.isinf(hi) or math.isinf(lo):
            return math.inf
        return max(hi - lo, 0.0)

    def curve_provider(self, scale: float = 1.0) -> CurveProvider:
        return gaussian_curves(*self.dims, scale=scale)

    def resolvent(self, anchor: ProductPoint, tau: float, tol: float = 0.0, **_) -> ResolventResult:
        point = quadratic_resolvent(self, anchor, tau)
        return ResolventResult(point, _quadratic_resolvent_gap(self, anchor, tau, point), 1, "linear-solve", tol)

    def saddle_problem(self, x0=None, y0=None) -> SaddleProblem:
        d1, d2 = self.dims
        return SaddleProblem(
            value=self.evaluate, grad_x=self.grad_x, grad_y=self.grad_y, lam=self.lam,
            x0=np.zeros(d1) if x0 is None else np.asarray(x0, dtype=float),
            y0=np.zeros(d2) if y0 is None else np.asarray(y0, dtype=float),
            gap=lambda x, y: self.ni_gap(hilbert_point(x, y)),
            argmin_x=lambda y: np.linalg.solve(self.A, -(self.a + self.C @ y)) if self.lam > 0 else None)

    def partial_moreau_yosida(self, anchor: ProductPoint, tau: float, which: str, probe) -> float:
        """One-sided Moreau-Yosida values in closed form.

        ``which="X"``: ``sup_{y'} phi(probe, y') - |y' - y|^2/(2 tau)``;
        ``which="Y"``: ``inf_{x'} phi(x', probe) + |x' - x|^2/(2 tau)``.
        """
        probe = np.atleast_1d(np.asarray(probe, dtype=float))
        x, y = anchor.x, anchor.y
        if which == "X":
            H = self.B + np.eye(self.b.size) / tau
            g = self.C.T @ probe - self.b + y / tau
            v = np.linalg.solve(H, g)
            return float(0.5 * probe @ self.A @ probe + self.a @ probe + 0.5 * g @ v - y @ y / (2 * tau))
        if which == "Y":
            H = self.A + np.eye(self.a.size) / tau
            g = -(self.a + self.C @ probe) + x / tau
            v = np.linalg.solve(H, g)
            return float(-0.5 * probe @ self.B @ probe - self.b @ probe - 0.5 * g @ v + x @ x / (2 * tau))
        raise ValueError("which must be 'X' or 'Y'")


def _quadratic_resolvent_gap(obj: QuadraticSaddleObjective, anchor, tau, point) -> float:
    """Gap bound ``|grad Phi_tau|^2 / (2 mu)`` at the computed resolvent."""
    gx = obj.grad_x(point.x, point.y) + (point.x - anchor.x) / tau
    gy = obj.grad_y(point.x, point.y) - (point.y - anchor.y) / tau
    return float((gx @ gx + gy @ gy) / (2.0 * (1.0 / tau + obj.lam)))


def quadratic_resolvent(obj: QuadraticSaddleObjective, anchor: ProductPoint, tau: float) -> ProductPoint:
    """Exact resolvent of a quadratic objective.

    Solves ``(A + I/tau) x' + C y' = x/tau - a`` and
    ``-C^T x' + (B + I/tau) y' = y/tau - b`` by LU with partial pivoting.

    Raises
    ------
    StepTooLarge
        If ``tau >= 1 / lambda_minus``.
    SingularSystem
        Defensive; cannot happen below the step restriction.
    """
    tau = obj.modulus.check_tau(tau)
    d1, d2 = obj.dims
    K = np.block([[obj.A + np.eye(d1) / tau, obj.C], [-obj.C.T, obj.B + np.eye(d2) / tau]])
    rhs = np.concatenate([anchor.x / tau - obj.a, anchor.y / tau - obj.b])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem("resolvent system is singular") from exc
    # one step of iterative refinement keeps the residual at round-off
    sol = sol + np.linalg.solve(K, rhs - K @ sol)
    if np.linalg.norm(K @ sol - rhs) > 1e-10 * (1.0 + np.linalg.norm(rhs)):
        raise SingularSystem("resolvent system is ill-conditioned")
    return hilbert_point(sol[:d1], sol[d1:])


# ------------------------------------------------------------ exact flow


def expm(M: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling and squaring of a Taylor series.

    The matrix is scaled so that its 1-norm is at most 1/2, the series is
    summed until the next term drops below machine precision, and the result
    is squared back.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    norm = float(np.abs(M).sum(axis=0).max()) if M.size else 0.0
    s = max(0, int(math.ceil(math.log2(norm / 0.5)))) if norm > 0.5 else 0
    X = M / (2.0 ** s)
    E = np.eye(M.shape[0])
    term = np.eye(M.shape[0])
    for k in range(1, 60):
        term = term @ X / k
        E = E + term
        if np.abs(term).max() <= 1e-18 * np.abs(E).max():
            break
    for _ in range(s):
        E = E @ E
    return E


def exact_linear_flow(obj: QuadraticSaddleObjective, z0: ProductPoint, t: float) -> ProductPoint:
    """Solution at time ``t`` of ``u' = -(A u + a + C v)``, ``v' = C^T u - B v - b``.

    The affine system is embedded in a linear one of dimension
    ``d1 + d2 + 1`` and advanced with :func:`expm`.
    """
    d1, d2 = obj.dims
    d = d1 + d2
    G = np.zeros((d + 1, d + 1))
    G[:d1, :d1] = -obj.A
    G[:d1, d1:d] = -obj.C
    G[d1:d, :d1] = obj.C.T
    G[d1:d, d1:d] = -obj.B
    G[:d1, d] = -obj.a
    G[d1:d, d] = -obj.b
    w = expm(G * float(t)) @ np.concatenate([z0.x, z0.y, [1.0]])
    return hilbert_point(w[:d1], w[d1:d])


# ------------------------------------------------------------ brute force


def brute_force_saddle(obj: BivariateObjective, box: tuple[tuple[float, float], tuple[float, float]],
                       grid: int = 401) -> ProductPoint:
    """Grid minimax oracle for scalar ``x`` and ``y``.

    ``x`` minimizes the row-wise maximum and ``y`` maximizes the column-wise
    minimum of the value table; accuracy is one grid cell.
    """
    dims = getattr(obj, "dims", (1, 1))
    if tuple(dims) != (1, 1):
        raise DimensionTooLarge("brute_force_saddle supports d1 = d2 = 1 only")
    (xl, xh), (yl, yh) = box
    xs = np.linspace(xl, xh, grid)
    ys = np.linspace(yl, yh, grid)
    if hasattr(obj, "grid_values"):
        F = obj.grid_values(xs, ys)
    else:
        F = np.array([[obj.evaluate(np.array([u]), np.array([v])) for v in ys] for u in xs])
    i = int(np.argmin(F.max(axis=1)))
    j = int(np.argmax(F.min(axis=0)))
    return hilbert_point([xs[i]], [ys[j]])


def partial_gradients(obj, z: ProductPoint) -> tuple[Vector, Vector]:
    """``(grad_x phi(z), grad_y phi(z))`` for smooth objectives."""
    return obj.partial_gradients(z)


# ---------------------------------------------------------------- composite


@dataclass(frozen=True)
class ProxTerm:
    """A convex function answering exact proximal queries.

    Subclasses implement ``value``, ``prox(v, t) = argmin f + |. - v|^2/(2t)``
    and ``gradient`` where differentiable.
    """

    strong_convexity: float = field(default=0.0, init=False)

    def value(self, v: Vector) -> float:
        raise NotImplementedError

    def prox(self, v: Vector, t: float) -> Vector:
        raise NotImplementedError

    def gradient(self, v: Vector) -> Vector:
        raise NotImplementedError

    def contains(self, v: Vector) -> bool:
        return True

    def box(self) -> Box | None:
        return None


@dataclass(frozen=True)
class ZeroTerm(ProxTerm):
    def value(self, v):
        return 0.0

    def prox(self, v, t):
        return np.asarray(v, dtype=float)

    def gradient(self, v):
        return np.zeros_like(np.asarray(v, dtype=float))


@dataclass(frozen=True)
class BoxIndicator(ProxTerm):
    """Indicator of ``[lo, hi]`` (0 inside, ``inf`` outside)."""

    lo: float = -math.inf
    hi: float = math.inf

    def contains(self, v) -> bool:
        v = np.asarray(v)
        return bool(np.all(v >= self.lo - 1e-12) and np.all(v <= self.hi + 1e-12))

    def value(self, v):
        return 0.0 if self.contains(v) else math.inf

    def prox(self, v, t):
        return np.clip(np.asarray(v, dtype=float), self.lo, self.hi)

    def gradient(self, v):
        v = np.asarray(v, dtype=float)
        if np.any(v <= self.lo) or np.any(v >= self.hi):
            raise NotDifferentiable("box indicator is not differentiable on its boundary")
        return np.zeros_like(v)

    def box(self) -> Box:
        return Box(self.lo, self.hi)


@dataclass(frozen=True)
class L1Penalty(ProxTerm):
    """``weight * |v|_1``."""

    weight: float = 1.0

    def value(self, v):
        return float(self.weight * np.abs(v).sum())

    def prox(self, v, t):
        v = np.asarray(v, dtype=float)
        return np.sign(v) * np.maximum(np.abs(v) - t * self.weight, 0.0)

    def gradient(self, v):
        v = np.asarray(v, dtype=float)
        if np.any(v == 0):
            raise NotDifferentiable("l1 penalty is not differentiable at zero")
        return self.weight * np.sign(v)


@dataclass(frozen=True)
class SquaredNorm(ProxTerm):
    """``weight/2 * |v|^2``; contributes ``weight`` to the modulus."""

    weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "strong_convexity", float(self.weight))

    def value(self, v):
        v = np.asarray(v, dtype=float)
        return float(0.5 * self.weight * v @ v)

    def prox(self, v, t):
        return np.asarray(v, dtype=float) / (1.0 + t * self.weight)

    def gradient(self, v):
        return self.weight * np.asarray(v, dtype=float)


@dataclass(frozen=True)
class SmoothCoupling:
    """User-supplied C^1 convex-concave part with its partial gradients."""

    value: Callable[[Vector, Vector], float]
    grad_x: Callable[[Vector, Vector], Vector]
    grad_y: Callable[[Vector, Vector], Vector]
    lam: float
    dims: tuple[int, int]
    lipschitz: float | None = None


@dataclass(frozen=True, eq=False)
class CompositeSaddleObjective(BivariateObjective):
    """``phi(x, y) = smooth(x, y) + f(x) - g(y)`` with prox-capable ``f`` and ``g``.

    The declared modulus adds the strong convexity of ``f`` and ``g`` to the
    modulus of the smooth part.
    """

    smooth: QuadraticSaddleObjective | SmoothCoupling
    f: ProxTerm = field(default_factory=ZeroTerm)
    g: ProxTerm = field(default_factory=ZeroTerm)
    lam_override: float | None = None

    backend = BACKEND

    @property
    def dims(self) -> tuple[int, int]:
        return tuple(self.smooth.dims)  # type: ignore[return-value]

    @property
    def modulus(self) -> ConvexityModulus:  # type: ignore[override]
        if self.lam_override is not None:
            return ConvexityModulus(self.lam_override)
        s = self.smooth
        if isinstance(s, QuadraticSaddleObjective):
            lx = smallest_eigenvalue(s.A) + self.f.strong_convexity
            ly = smallest_eigenvalue(s.B) + self.g.strong_convexity
            return ConvexityModulus(min(lx, ly, s.lam + min(self.f.strong_convexity, self.g.strong_convexity)))
        return ConvexityModulus(s.lam + min(self.f.strong_convexity, self.g.strong_convexity))

    def _smooth_value(self, x, y) -> float:
        return float(self.smooth.evaluate(x, y) if isinstance(self.smooth, QuadraticSaddleObjective)
                     else self.smooth.value(x, y))

    def evaluate(self, x, y) -> float:
        from .core import extended_sum
        x, y = np.atleast_1d(np.asarray(x, dtype=float)), np.atleast_1d(np.asarray(y, dtype=float))
        return extended_sum(self._smooth_value(x, y), self.f.value(x), -self.g.value(y))

    def in_domain_x(self, x) -> bool:
        return self.f.contains(x)

    def in_domain_y(self, y) -> bool:
        return self.g.contains(y)

    def decomposition(self):
        return self._smooth_value, self.f.value, lambda y: -self.g.value(y)

    def grad_x_smooth(self, x, y) -> Vector:
        return np.asarray(self.smooth.grad_x(x, y), dtype=float)

    def grad_y_smooth(self, x, y) -> Vector:
        return np.asarray(self.smooth.grad_y(x, y), dtype=float)

    def partial_gradients(self, z: ProductPoint) -> tuple[Vector, Vector]:
        """Gradients off the nonsmooth set; raises :class:`NotDifferentiable` on it."""
        gx = self.grad_x_smooth(z.x, z.y) + self.f.gradient(z.x)
        gy = self.grad_y_smooth(z.x, z.y) - self.g.gradient(z.y)
        return gx, gy

    def local_slope(self, z: ProductPoint) -> float:
        """Minimal-norm element of the (sub/super)differential.

        Exact for separable terms: box constraints and l1 penalties are
        coordinate-wise, so the minimal-norm subgradient is found per
        coordinate.
        """
        vx = _min_norm_sub(self.grad_x_smooth(z.x, z.y), z.x, self.f)
        vy = _min_norm_sub(-self.grad_y_smooth(z.x, z.y), z.y, self.g)
        return float(math.sqrt(vx @ vx + vy @ vy))

    def feasible_box(self) -> tuple[Box | None, Box | None]:
        return self.f.box(), self.g.box()

    def ni_gap(self, z: ProductPoint, feasible_box=None) -> float:
        from .saddle import restricted_ni_gap
        return restricted_ni_gap(self.saddle_problem(z.x, z.y), z)

    def saddle_problem(self, x0=None, y0=None, gap=True) -> SaddleProblem:
        d1, d2 = self.dims
        obj = self
        exact = None
        if gap and isinstance(self.smooth, QuadraticSaddleObjective) and \
                isinstance(self.f, (ZeroTerm, BoxIndicator)) and isinstance(self.g, (ZeroTerm, BoxIndicator)):
            def exact(x, y):
                return self.smooth.ni_gap(hilbert_point(x, y), (self.f.box(), self.g.box()))
        return SaddleProblem(
            value=lambda x, y: obj.evaluate(x, y),
            grad_x=self.grad_x_smooth, grad_y=self.grad_y_smooth, lam=self.modulus.lam,
            x0=np.zeros(d1) if x0 is None else np.asarray(x0, dtype=float),
            y0=np.zeros(d2) if y0 is None else np.asarray(y0, dtype=float),
            prox_x=self.f.prox, prox_y=self.g.prox, gap=exact,
            lipschitz=_smooth_lipschitz(self.smooth))

    def resolvent(self, anchor: ProductPoint, tau: float, tol: float = 1e-12,
                  max_iter: int = 100_000, **_) -> ResolventResult:
        return composite_resolvent(self, anchor, tau, tol, max_iter)

    def curve_provider(self, scale: float = 1.0) -> CurveProvider:
        d1, d2 = self.dims
        fx, gy = self.f, self.g

        def sampler(term, d):
            def draw(rng):
                v = scale * rng.standard_normal(d)
                return term.prox(v, 1.0) if isinstance(term, BoxIndicator) else v
            return draw

        return CurveProvider(sampler(fx, d1), sampler(gy, d2), _segment, _segment)

    def partial_moreau_yosida(self, anchor: ProductPoint, tau: float, which: str, probe) -> float:
        """One-sided Moreau-Yosida values by proximal gradient (strongly convex inner problem)."""
        probe = np.atleast_1d(np.asarray(probe, dtype=float))
        L = _smooth_lipschitz(self.smooth) + 1.0 / tau
        eta = 1.0 / L
        if which == "X":
            v = anchor.y.copy()
            for _ in range(200_000):
                grad = self.grad_y_smooth(probe, v) - (v - anchor.y) / tau
                vn = self.g.prox(v + eta * grad, eta)
                if np.linalg.norm(vn - v) <= 1e-15 * (1 + np.linalg.norm(v)):
                    v = vn
                    break
                v = vn
            return self.evaluate(probe, v) - float((v - anchor.y) @ (v - anchor.y)) / (2 * tau)
        if which == "Y":
            u = anchor.x.copy()
            for _ in range(200_000):
                grad = self.grad_x_smooth(u, probe) + (u - anchor.x) / tau
                un = self.f.prox(u - eta * grad, eta)
                if np.linalg.norm(un - u) <= 1e-15 * (1 + np.linalg.norm(u)):
                    u = un
                    break
                u = un
            return self.evaluate(u, probe) + float((u - anchor.x) @ (u - anchor.x)) / (2 * tau)
        raise ValueError("which must be 'X' or 'Y'")


def _min_norm_sub(grad: Vector, v: Vector, term: ProxTerm) -> Vector:
    """Minimal-norm element of ``grad + subdifferential(term)(v)``."""
    grad = np.asarray(grad, dtype=float).copy()
    if isinstance(term, ZeroTerm):
        return grad
    if isinstance(term, SquaredNorm):
        return grad + term.gradient(v)
    if isinstance(term, BoxIndicator):
        at_lo = v <= term.lo + 1e-15
        at_hi = v >= term.hi - 1e-15
        grad[at_lo] = np.minimum(grad[at_lo], 0.0)  # normal cone (-inf, 0]
        grad[at_hi] = np.maximum(grad[at_hi], 0.0)
        return grad
    if isinstance(term, L1Penalty):
        w = term.weight
        out = np.where(v > 0, grad + w, np.where(v < 0, grad - w, 0.0))
        zero = v == 0
        out[zero] = np.sign(grad[zero]) * np.maximum(np.abs(grad[zero]) - w, 0.0)
        return out
    raise NotDifferentiable(f"no subdifferential rule for {type(term).__name__}")


def _smooth_lipschitz(smooth) -> float:
    if isinstance(smooth, QuadraticSaddleObjective):
        K = np.block([[smooth.A, smooth.C], [-smooth.C.T, smooth.B]])
        return float(np.linalg.norm(K, 2))
    if smooth.lipschitz is None:
        raise ValueError("SmoothCoupling needs a Lipschitz constant")
    return float(smooth.lipschitz)


STALL_WINDOW = 10
STALL_RATIO = 0.99


def composite_resolvent(obj: CompositeSaddleObjective, anchor: ProductPoint, tau: float,
                        tol: float = 1e-12, max_iter: int = 100_000) -> ResolventResult:
    """Resolvent of a composite objective.

    Runs the damped (factor 1/2) alternating proximal fixed point
    ``x' <- prox_{tau f}(x - tau grad_x(x', y'))``,
    ``y' <- prox_{tau g}(y + tau grad_y(x', y'))``. If the fixed-point residual
    fails to shrink by 1% over 10 iterations the solve restarts with
    extragradient on the regularized problem. The iteration continues past
    ``tol`` until the fixed-point residual reaches round-off, so the returned
    point is accurate to first order and not only in the gap.

    Returns
    -------
    ResolventResult
        ``gap`` bounds the gap of the regularized functional at the point.
    """
    tau = obj.modulus.check_tau(tau)
    mu = 1.0 / tau + obj.modulus.lam
    xa, ya = np.asarray(anchor.x, dtype=float), np.asarray(anchor.y, dtype=float)

    def gx(x, y):
        return obj.grad_x_smooth(x, y) + (x - xa) / tau

    def gy(x, y):
        return obj.grad_y_smooth(x, y) - (y - ya) / tau

    def fb_map(x, y):
        xn = obj.f.prox(xa - tau * obj.grad_x_smooth(x, y), tau)
        yn = obj.g.prox(ya + tau * obj.grad_y_smooth(xn, y), tau)
        return xn, yn

    def certificate(x, y):
        # forward-backward step with step tau on the regularized problem
        xp = obj.f.prox(x - tau * gx(x, y), tau)
        yp = obj.g.prox(y + tau * gy(x, y), tau)
        vx = gx(xp, yp) - gx(x, y) + (x - xp) / tau
        vy = gy(xp, yp) - gy(x, y) - (y - yp) / tau
        return xp, yp, float((vx @ vx + vy @ vy) / (2 * mu))

    x, y = obj.f.prox(xa, tau), obj.g.prox(ya, tau)
    residuals: list[float] = []
    best = None
    it = 0
    stalled = False
    while it < max_iter:
        xn, yn = fb_map(x, y)
        r = float(np.linalg.norm(xn - x) + np.linalg.norm(yn - y))
        x, y = 0.5 * (x + xn), 0.5 * (y + yn)
        it += 1
        residuals.append(r)
        scale = 1.0 + float(np.linalg.norm(x) + np.linalg.norm(y))
        if r <= 1e-15 * scale or (len(residuals) > STALL_WINDOW and
                                  r > STALL_RATIO * residuals[-1 - STALL_WINDOW]):
            cx, cy, gap = certificate(x, y)
            if best is None or gap < best[2]:
                best = (cx, cy, gap)
            if gap <= tol:
                break
            if r > 1e-15 * scale:
                stalled = True
                break
        if not np.isfinite(r):
            stalled = True
            break
    if best is None or best[2] > tol:
        if not stalled and best is None:
            cx, cy, gap = certificate(x, y)
            best = (cx, cy, gap)
        if stalled or best[2] > tol:
            problem = SaddleProblem(
                value=lambda u, v: obj.evaluate(u, v) + float((u - xa) @ (u - xa) - (v - ya) @ (v - ya)) / (2 * tau),
                grad_x=gx, grad_y=gy, lam=mu, x0=xa, y0=ya, prox_x=obj.f.prox, prox_y=obj.g.prox,
                lipschitz=_smooth_lipschitz(obj.smooth) + 1.0 / tau)
            try:
                cert = solve_saddle(problem, tol=tol * 1e-6, max_iter=max_iter)
                best = (cert.point.x, cert.point.y, cert.gap)
                it += cert.iterations
            except NoConvergence as exc:
                cert = exc.best
                it += exc.iterations
                if best is None or cert.gap < best[2]:
                    best = (cert.point.x, cert.point.y, cert.gap)
            method = "extragradient"
        else:
            method = "alternating-prox"
    else:
        method = "alternating-prox"
    bx, by, bgap = best
    result = ResolventResult(hilbert_point(bx, by), bgap, it, method, tol)
    if not bgap <= tol:
        raise NoConvergence(f"composite resolvent gap {bgap:.3e} above tol {tol:.1e}",
                            best=result, gap=bgap, iterations=it)
    return result
