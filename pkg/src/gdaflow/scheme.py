"""Minimizing-maximizing movements: resolvent iteration and its error bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .core import (
    BivariateObjective,
    NonpositiveTau,
    ProductPoint,
    ResolventResult,
    StepTooLarge,
    regularized_objective,
)


@dataclass(frozen=True)
class FlowTrajectory:
    """Points ``W^k = J_tau^k z0`` at times ``k * tau`` with per-step certificates."""

    times: np.ndarray
    points: tuple[ProductPoint, ...]
    tau: float
    certificates: tuple[ResolventResult, ...] = field(default=(), repr=False)
    tol: float = 0.0

    def __len__(self) -> int:
        return len(self.points)

    @property
    def final(self) -> ProductPoint:
        return self.points[-1]


@dataclass(frozen=True)
class ErrorBudget:
    """Inputs of the a-priori error estimate.

    ``slope0`` is the slope at the initial datum, ``T`` the horizon, ``N`` the
    base step count (``T/N < 1/lambda_minus``) and ``n`` the refinement.
    """

    slope0: float
    T: float
    N: int
    lambda_minus: float
    n: int


def inner_tolerance(tol: float, tau: float) -> float:
    """Per-step tolerance ``tol * tau^2``."""
    return tol * tau * tau


def resolvent_step(obj: BivariateObjective, anchor: ProductPoint, tau: float,
                   tol: float = 1e-10) -> ResolventResult:
    """One implicit step ``J_tau(anchor)``, dispatched to the backend.

    Closed-form backends ignore ``tol``; iterative ones certify their gap
    below it.
    """
    if not tau > 0:
        raise NonpositiveTau(f"step size must be positive, got {tau}")
    obj.modulus.check_tau(tau)
    return obj.resolvent(anchor, tau, tol)


def mmx_trajectory(obj: BivariateObjective, z0: ProductPoint, tau: float, steps: int,
                   tol: float = 1e-6) -> FlowTrajectory:
    """Iterate the resolvent ``steps`` times from ``z0``.

    Each step is solved to ``tol * tau^2``. Returns ``steps + 1`` points.
    """
    obj.modulus.check_tau(tau)
    tol_in = inner_tolerance(tol, tau)
    points = [z0]
    certs = []
    z = z0
    for _ in range(int(steps)):
        res = resolvent_step(obj, z, tau, tol_in)
        certs.append(res)
        z = res.point
        points.append(z)
    times = np.arange(int(steps) + 1) * float(tau)
    return FlowTrajectory(times, tuple(points), float(tau), tuple(certs), tol_in)


def flow_approximation(obj: BivariateObjective, z0: ProductPoint, t: float, n: int,
                       tol: float = 1e-6) -> ProductPoint:
    """``J_{t/n}^n z0``; ``t = 0`` returns ``z0``."""
    if t == 0:
        return z0
    return mmx_trajectory(obj, z0, t / n, n, tol).final


def error_bound_constant(T: float, N: int, lambda_minus: float) -> float:
    """``(1 - lm T/N)^(-2(N+1)) T^2 (1 + (T lm)^2 / N)``."""
    h = lambda_minus * T / N
    if h >= 1.0:
        raise StepTooLarge(f"T/N = {T / N} must be below 1/lambda_minus")
    return (1.0 - h) ** (-2 * (N + 1)) * T * T * (1.0 + (T * lambda_minus) ** 2 / N)


def a_priori_error_sq(budget: ErrorBudget) -> float:
    """Squared-distance bound ``slope0^2 C(T, N, lm) / n``."""
    C = error_bound_constant(budget.T, budget.N, budget.lambda_minus)
    return budget.slope0 ** 2 * C / budget.n


def a_priori_error(budget: ErrorBudget, t: float | None = None) -> float:
    """Distance bound ``slope0 * sqrt(C(T, N, lm) / n)`` valid for ``t`` in ``[0, T]``."""
    if t is not None and not 0 <= t <= budget.T:
        raise ValueError("t must lie in [0, T]")
    return math.sqrt(a_priori_error_sq(budget))


def resolvent_comparison_constants(tau0: float, tau1: float, n: int, m: int,
                                   lambda_minus: float) -> tuple[float, float]:
    """The pair ``(C, c)`` of the resolvent comparison estimate."""
    lm = lambda_minus
    if lm * tau0 >= 1 or lm * tau1 >= 1:
        raise StepTooLarge("both step sizes must be below 1/lambda_minus")
    C = max((1 - lm * tau0) ** (-2 * n) * (1 - lm * tau1) ** (-2),
            (1 - lm * tau0) ** (-2) * (1 - lm * tau1) ** (-2 * m))
    c = min(n * (tau0 - lm * tau0 * tau1), m * (tau1 - lm * tau0 * tau1))
    return C, c


def resolvent_comparison_bound(slope0: float, tau0: float, tau1: float, n: int, m: int,
                               lambda_minus: float) -> float:
    """Bound on ``d_Z^2(J_{tau0}^n z, J_{tau1}^m z)``.

    ``slope0^2 C [(n tau0 - m tau1 - lm tau0 tau1 (n - m))^2
    + (tau0 + tau1 - 2 lm tau0 tau1) c]``.
    """
    lm = lambda_minus
    C, c = resolvent_comparison_constants(tau0, tau1, n, m, lm)
    drift = n * tau0 - m * tau1 - lm * tau0 * tau1 * (n - m)
    return slope0 ** 2 * C * (drift ** 2 + (tau0 + tau1 - 2 * lm * tau0 * tau1) * c)


def moreau_yosida_value(obj: BivariateObjective, anchor: ProductPoint, tau: float,
                        tol: float = 1e-12) -> float:
    """``phi_tau(z) = Phi_tau(z; J_tau z)``."""
    J = resolvent_step(obj, anchor, tau, tol).point
    return regularized_objective(obj, anchor, tau, J)


def partial_moreau_yosida(obj: BivariateObjective, anchor: ProductPoint, tau: float,
                          which: str, probe: Any) -> float:
    """One-sided values.

    ``which="X"``: ``sup_{y'} phi(probe, y') - d_Y^2(y', y)/(2 tau)``.
    ``which="Y"``: ``inf_{x'} phi(x', probe) + d_X^2(x', x)/(2 tau)``.
    """
    obj.modulus.check_tau(tau)
    return obj.partial_moreau_yosida(anchor, tau, which, probe)


def discrete_evi_residuals(obj: BivariateObjective, anchor: ProductPoint, J: ProductPoint,
                           tau: float, test_points: Sequence[ProductPoint],
                           lam: float | None = None) -> np.ndarray:
    """Signed residuals of the two one-step variational inequalities.

    For each test point ``(x', y')`` returns the pair
    ``[(d^2(Jx, x') - d^2(x, x'))/(2 tau) + lam/2 d^2(Jx, x') + phi(J)
    - phi(x', Jy) + d^2(Jx, x)/(2 tau),
    (d^2(Jy, y') - d^2(y, y'))/(2 tau) + lam/2 d^2(Jy, y') + phi(Jx, y')
    - phi(J) + d^2(Jy, y)/(2 tau)]``; nonpositive entries mean the
    inequality holds.
    """
    lam = obj.modulus.lam if lam is None else lam
    met = obj.metric
    x, y = anchor.x, anchor.y
    jx, jy = J.x, J.y
    phiJ = obj.evaluate(jx, jy)
    djx = met.dist_x(jx, x) ** 2
    djy = met.dist_y(jy, y) ** 2
    out = np.empty((len(test_points), 2))
    for k, w in enumerate(test_points):
        a = met.dist_x(jx, w.x) ** 2
        b = met.dist_x(x, w.x) ** 2
        out[k, 0] = (a - b) / (2 * tau) + 0.5 * lam * a + phiJ - obj.evaluate(w.x, jy) + djx / (2 * tau)
        a = met.dist_y(jy, w.y) ** 2
        b = met.dist_y(y, w.y) ** 2
        out[k, 1] = (a - b) / (2 * tau) + 0.5 * lam * a + obj.evaluate(jx, w.y) - phiJ + djy / (2 * tau)
    return out
