"""Backend-agnostic building blocks.

Product points, product metrics, bivariate objectives with a declared
convexity modulus, the squared-distance regularization used by the
implicit scheme, and a sampled convexity validator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np


# --------------------------------------------------------------------- errors


class GdaflowError(Exception):
    """Base class for all library errors."""


class IndeterminateForm(GdaflowError, ArithmeticError):
    """Raised when an extended-real sum would be (+inf) + (-inf)."""


class NonpositiveTau(GdaflowError, ValueError):
    pass


class StepTooLarge(GdaflowError, ValueError):
    pass


class BackendMismatch(GdaflowError, TypeError):
    pass


class NotDifferentiable(GdaflowError, ValueError):
    pass


class NotStronglyConvexConcave(GdaflowError, ValueError):
    pass


class NonpositiveLambda(GdaflowError, ValueError):
    pass


class GridMismatch(GdaflowError, ValueError):
    pass


class Infeasible(GdaflowError, ValueError):
    pass


class NoConvergence(GdaflowError, RuntimeError):
    """Inner solver exhausted its iteration budget.

    Attributes
    ----------
    best : object
        Best iterate found (a certificate or a resolvent result).
    gap : float
        Certified gap of the best iterate.
    iterations : int
    """

    def __init__(self, message: str, best: Any = None, gap: float = math.inf, iterations: int = 0):
        super().__init__(message)
        self.best = best
        self.gap = gap
        self.iterations = iterations


# -------------------------------------------------------------- extended reals


def extended_sum(*terms: float) -> float:
    """Sum of extended reals with the convex-analysis conventions.

    Finite terms add normally and a single infinite sign dominates. Mixing
    ``+inf`` with ``-inf`` raises :class:`IndeterminateForm` instead of
    returning NaN.
    """
    has_pos = has_neg = False
    total = 0.0
    for t in terms:
        t = float(t)
        if math.isnan(t):
            raise IndeterminateForm("NaN operand in extended-real sum")
        if t == math.inf:
            has_pos = True
        elif t == -math.inf:
            has_neg = True
        else:
            total += t
    if has_pos and has_neg:
        raise IndeterminateForm("(+inf) + (-inf) is undefined")
    if has_pos:
        return math.inf
    if has_neg:
        return -math.inf
    return total


# -------------------------------------------------------------------- moduli


@dataclass(frozen=True)
class ConvexityModulus:
    """Declared modulus ``lam`` of convex-concavity.

    ``lambda_minus = max(-lam, 0)`` and ``tau_max = 1/lambda_minus``
    (``inf`` when ``lambda_minus == 0``) bound the admissible step sizes.
    """

    lam: float

    @property
    def lambda_minus(self) -> float:
        return max(-float(self.lam), 0.0)

    @property
    def tau_max(self) -> float:
        lm = self.lambda_minus
        return math.inf if lm == 0.0 else 1.0 / lm

    def check_tau(self, tau: float) -> float:
        tau = float(tau)
        if not tau > 0.0:
            raise NonpositiveTau(f"step size must be positive, got {tau}")
        if tau >= self.tau_max:
            raise StepTooLarge(f"tau={tau} must be below 1/lambda_minus={self.tau_max}")
        return tau


# ------------------------------------------------------------ product points


@dataclass(frozen=True)
class ProductPoint:
    """A point ``z = (x, y)`` of a product space, tagged with its backend."""

    x: Any
    y: Any
    backend: str

    def __iter__(self):
        yield self.x
        yield self.y


@dataclass(frozen=True)
class ProductMetric:
    """The l2 product of two metrics: ``d_Z^2 = d_X^2 + d_Y^2``."""

    dist_x: Callable[[Any, Any], float]
    dist_y: Callable[[Any, Any], float]

    def dist_z_sq(self, z1: ProductPoint, z2: ProductPoint) -> float:
        return self.dist_x(z1.x, z2.x) ** 2 + self.dist_y(z1.y, z2.y) ** 2

    def dist_z(self, z1: ProductPoint, z2: ProductPoint) -> float:
        return math.sqrt(self.dist_z_sq(z1, z2))


_METRICS: dict[str, ProductMetric] = {}


def register_backend(tag: str, metric: ProductMetric) -> None:
    _METRICS[tag] = metric


def backend_metric(tag: str) -> ProductMetric:
    try:
        return _METRICS[tag]
    except KeyError:
        raise BackendMismatch(f"unknown backend {tag!r}") from None


def product_distance_sq(z1: ProductPoint, z2: ProductPoint) -> float:
    """Squared product distance between two points of the same backend."""
    if z1.backend != z2.backend:
        raise BackendMismatch(f"cannot compare {z1.backend!r} with {z2.backend!r}")
    return backend_metric(z1.backend).dist_z_sq(z1, z2)


def product_distance(z1: ProductPoint, z2: ProductPoint) -> float:
    return math.sqrt(product_distance_sq(z1, z2))


# ---------------------------------------------------------------- objectives


@dataclass(frozen=True)
class ResolventResult:
    """Output of one implicit step together with its solver certificate."""

    point: ProductPoint
    gap: float
    iterations: int
    method: str
    tol: float = 0.0


class BivariateObjective:
    """Base class for a convex-concave functional ``phi(x, y)``.

    Subclasses provide ``evaluate`` and the domain predicates, declare a
    :class:`ConvexityModulus` and a backend tag. First-order access
    (``partial_gradients``) is optional.
    """

    backend: str = ""
    modulus: ConvexityModulus = ConvexityModulus(0.0)

    def evaluate(self, x: Any, y: Any) -> float:
        raise NotImplementedError

    def __call__(self, x: Any, y: Any) -> float:
        return self.evaluate(x, y)

    def in_domain_x(self, x: Any) -> bool:
        return True

    def in_domain_y(self, y: Any) -> bool:
        return True

    def decomposition(self) -> tuple[Callable, Callable, Callable] | None:
        """Optional split ``(coupling, psi_x, psi_y)`` with phi = sum of parts."""
        return None

    @property
    def metric(self) -> ProductMetric:
        return backend_metric(self.backend)

    def point(self, x: Any, y: Any) -> ProductPoint:
        return ProductPoint(x, y, self.backend)


@dataclass(frozen=True)
class CallableObjective(BivariateObjective):
    """Objective assembled from plain callables (handy for tests)."""

    func: Callable[[Any, Any], float]
    lam: float = 0.0
    backend: str = "hilbert"
    domain_x: Callable[[Any], bool] | None = None
    domain_y: Callable[[Any], bool] | None = None

    @property
    def modulus(self) -> ConvexityModulus:  # type: ignore[override]
        return ConvexityModulus(self.lam)

    def evaluate(self, x, y) -> float:
        return float(self.func(x, y))

    def in_domain_x(self, x) -> bool:
        return True if self.domain_x is None else bool(self.domain_x(x))

    def in_domain_y(self, y) -> bool:
        return True if self.domain_y is None else bool(self.domain_y(y))


def regularized_objective(phi: BivariateObjective, anchor: ProductPoint, tau: float,
                          probe: ProductPoint) -> float:
    """Evaluate ``phi(x', y') + (d_X(x', x)^2 - d_Y(y', y)^2) / (2 tau)``.

    Parameters
    ----------
    phi : BivariateObjective
    anchor : ProductPoint
        The point ``(x, y)`` the step starts from.
    tau : float
        Step size, strictly positive.
    probe : ProductPoint
        The point ``(x', y')`` at which the functional is evaluated.

    Returns
    -------
    float
        Extended real value. ``inf - inf`` raises :class:`IndeterminateForm`.
    """
    if not tau > 0:
        raise NonpositiveTau(f"step size must be positive, got {tau}")
    if anchor.backend != probe.backend:
        raise BackendMismatch(f"cannot mix {anchor.backend!r} and {probe.backend!r}")
    metric = backend_metric(anchor.backend)
    dx = metric.dist_x(probe.x, anchor.x)
    dy = metric.dist_y(probe.y, anchor.y)
    return extended_sum(phi.evaluate(probe.x, probe.y), dx * dx / (2.0 * tau), -dy * dy / (2.0 * tau))


@dataclass(frozen=True)
class RegularizedObjective(BivariateObjective):
    """``Phi_tau(anchor; x', y')`` seen as an objective in ``(x', y')``.

    Its declared modulus is ``1/tau + lam`` of the base objective.
    """

    base: BivariateObjective
    anchor: ProductPoint
    tau: float

    @property
    def backend(self) -> str:  # type: ignore[override]
        return self.base.backend

    @property
    def modulus(self) -> ConvexityModulus:  # type: ignore[override]
        return ConvexityModulus(1.0 / self.tau + self.base.modulus.lam)

    def evaluate(self, x, y) -> float:
        return regularized_objective(self.base, self.anchor, self.tau, ProductPoint(x, y, self.backend))

    def in_domain_x(self, x) -> bool:
        return self.base.in_domain_x(x)

    def in_domain_y(self, y) -> bool:
        return self.base.in_domain_y(y)


# ------------------------------------------------------ convexity validation


@dataclass(frozen=True)
class CurveProvider:
    """Sampling and interpolation hooks supplied by a backend.

    ``interp_x(x0, x1, t)`` is the curve along which convexity in ``x`` is
    claimed, ``sample_x(rng)`` draws a point of the domain.
    """

    sample_x: Callable[[np.random.Generator], Any]
    sample_y: Callable[[np.random.Generator], Any]
    interp_x: Callable[[Any, Any, float], Any]
    interp_y: Callable[[Any, Any, float], Any]


@dataclass(frozen=True)
class ViolationReport:
    """Worst signed violations (``<= 0`` means the inequality held)."""

    convex_violation: float
    concave_violation: float
    samples: int
    worst_pair: tuple = field(default=(), compare=False)

    @property
    def max_violation(self) -> float:
        return max(self.convex_violation, self.concave_violation)


CURVE_TIMES = (0.25, 0.5, 0.75)


def validate_convex_concavity(phi: BivariateObjective, curve_provider: CurveProvider,
                              samples: int = 100, seed: int = 0,
                              lam: float | None = None) -> ViolationReport:
    """Check declared lam-convex-concavity along backend curves by sampling.

    For each sampled pair ``x0, x1`` (and an independent ``y``) the
    inequality ``phi(g_t, y) <= (1-t) phi(x0, y) + t phi(x1, y)
    - lam/2 t(1-t) d_X(x0, x1)^2`` is tested at ``t`` in {1/4, 1/2, 3/4};
    the concave side is mirrored.

    Parameters
    ----------
    phi : BivariateObjective
    curve_provider : CurveProvider
    samples : int
        Number of random endpoint pairs per side.
    seed : int
    lam : float, optional
        Modulus to test; defaults to ``phi.modulus.lam``.
    """
    lam = phi.modulus.lam if lam is None else float(lam)
    rng = np.random.default_rng(seed)
    metric = phi.metric
    worst_cvx = worst_ccv = -math.inf
    worst_pair: tuple = ()
    for _ in range(samples):
        x0, x1 = curve_provider.sample_x(rng), curve_provider.sample_x(rng)
        y = curve_provider.sample_y(rng)
        dx2 = metric.dist_x(x0, x1) ** 2
        f0, f1 = phi.evaluate(x0, y), phi.evaluate(x1, y)
        for t in CURVE_TIMES:
            ft = phi.evaluate(curve_provider.interp_x(x0, x1, t), y)
            v = ft - ((1 - t) * f0 + t * f1 - 0.5 * lam * t * (1 - t) * dx2)
            if v > worst_cvx:
                worst_cvx, worst_pair = v, ("x", x0, x1, y, t)
        y0, y1 = curve_provider.sample_y(rng), curve_provider.sample_y(rng)
        x = curve_provider.sample_x(rng)
        dy2 = metric.dist_y(y0, y1) ** 2
        g0, g1 = phi.evaluate(x, y0), phi.evaluate(x, y1)
        for t in CURVE_TIMES:
            gt = phi.evaluate(x, curve_provider.interp_y(y0, y1, t))
            v = (1 - t) * g0 + t * g1 + 0.5 * lam * t * (1 - t) * dy2 - gt
            if v > worst_ccv:
                worst_ccv = v
                if v > worst_cvx:
                    worst_pair = ("y", y0, y1, x, t)
    return ViolationReport(worst_cvx, worst_ccv, samples, worst_pair)


def sample_points(sampler: Callable[[np.random.Generator], Any], count: int,
                  seed: int) -> list[Any]:
    rng = np.random.default_rng(seed)
    return [sampler(rng) for _ in range(count)]


def as_vector(v: Sequence[float] | float | np.ndarray) -> np.ndarray:
    """Coerce to a read-only 1-D float array."""
    arr = np.array(v, dtype=float).reshape(-1)
    arr.setflags(write=False)
    return arr
