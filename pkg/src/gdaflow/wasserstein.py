"""Grid discretization of the Wasserstein saddle setting in one dimension.

Points are probability vectors on fixed sorted supports. Distances are exact
quadratic transport costs computed from quantile functions. The objective is
a bilinear interaction plus relative entropies against fixed references.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.special import logsumexp

from . import _kernels
from .core import (
    BivariateObjective,
    ConvexityModulus,
    CurveProvider,
    GdaflowError,
    NoConvergence,
    ProductMetric,
    ProductPoint,
    ResolventResult,
    register_backend,
)

BACKEND = "wasserstein1d"
SIMPLEX_TOL = 1e-12
BOUNDARY_FLOOR = 1e-300
POLISH_START = 1e-7
POLISH_CHUNK = 2_000
EXACT_GAP = 1e-13


class InstanceTooLarge(GdaflowError, ValueError):
    pass


class SupportMismatch(GdaflowError, ValueError):
    pass


class BoundaryPoint(GdaflowError, ValueError):
    pass


# ------------------------------------------------------------------ measures


@dataclass(frozen=True, eq=False)
class GridMeasure:
    """Probability vector ``weights`` on a strictly increasing ``support``."""

    support: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        s = np.array(self.support, dtype=float).reshape(-1)
        w = np.array(self.weights, dtype=float).reshape(-1)
        if s.shape != w.shape or s.size == 0:
            raise SupportMismatch("support and weights must be non-empty and of equal length")
        if np.any(np.diff(s) <= 0):
            raise ValueError("support must be strictly increasing")
        if np.any(w < -SIMPLEX_TOL) or abs(w.sum() - 1.0) > SIMPLEX_TOL * max(1, w.size):
            raise ValueError("weights must lie in the probability simplex")
        w = np.clip(w, 0.0, None)
        s.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "support", s)
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return self.weights.size

    def with_weights(self, w: np.ndarray) -> "GridMeasure":
        w = np.clip(np.asarray(w, dtype=float), 0.0, None)
        return GridMeasure(self.support, w / w.sum())

    def __eq__(self, other) -> bool:
        return (isinstance(other, GridMeasure) and np.array_equal(self.support, other.support)
                and np.array_equal(self.weights, other.weights))

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"GridMeasure(m={self.size}, weights={np.array2string(self.weights, precision=4)})"


def dirac(support: Sequence[float], index: int) -> GridMeasure:
    w = np.zeros(len(support))
    w[index] = 1.0
    return GridMeasure(np.asarray(support, dtype=float), w)


def uniform(support: Sequence[float]) -> GridMeasure:
    n = len(support)
    return GridMeasure(np.asarray(support, dtype=float), np.full(n, 1.0 / n))


# -------------------------------------------------------------- transport


def _quantile_blocks(a: np.ndarray, b: np.ndarray):
    """Merged cumulative partitions: block lengths and the atom of each side."""
    ca = np.concatenate(([0.0], np.cumsum(a)))
    cb = np.concatenate(([0.0], np.cumsum(b)))
    ca[-1] = cb[-1] = 1.0
    br = np.union1d(ca, cb)
    lengths = np.diff(br)
    mids = 0.5 * (br[:-1] + br[1:])
    # left-closed blocks: level s belongs to atom i when ca[i] <= s < ca[i+1]
    ia = np.clip(np.searchsorted(ca, mids, side="right") - 1, 0, a.size - 1)
    ib = np.clip(np.searchsorted(cb, mids, side="right") - 1, 0, b.size - 1)
    keep = lengths > 0
    return lengths[keep], ia[keep], ib[keep]


def w2_sq_1d(mu: GridMeasure, nu: GridMeasure) -> float:
    lengths, ia, ib = _quantile_blocks(mu.weights, nu.weights)
    diff = mu.support[ia] - nu.support[ib]
    return float(np.sum(lengths * diff * diff))


def w2_distance_1d(mu: GridMeasure, nu: GridMeasure) -> float:
    """Exact quadratic Wasserstein distance between two grid measures.

    The quantile functions of both measures are piecewise constant; merging
    their breakpoints gives the integral of the squared quantile difference
    in closed form.

    Parameters
    ----------
    mu, nu : GridMeasure
        Supports may differ.

    Returns
    -------
    float
        ``W_2(mu, nu)``.
    """
    return math.sqrt(max(w2_sq_1d(mu, nu), 0.0))


def monotone_coupling(mu: GridMeasure, nu: GridMeasure) -> np.ndarray:
    """The comonotone (north-west corner) transport plan as an m x n matrix."""
    lengths, ia, ib = _quantile_blocks(mu.weights, nu.weights)
    plan = np.zeros((mu.size, nu.size))
    np.add.at(plan, (ia, ib), lengths)
    return plan


def _nw_corner_basis(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """North-west corner rule. Exhausting a row and a column at once advances the row."""
    m, n = a.size, b.size
    ra, rb = a.astype(float).copy(), b.astype(float).copy()
    x = np.zeros((m, n))
    basis = []
    i = j = 0
    while i < m and j < n:
        q = min(ra[i], rb[j])
        x[i, j] = q
        basis.append((i, j))
        ra[i] -= q
        rb[j] -= q
        if i == m - 1 and j == n - 1:
            break
        if (ra[i] <= rb[j] and i < m - 1) or j == n - 1:
            i += 1
        else:
            j += 1
    return x, basis


def _potentials(cost: np.ndarray, basis: list[tuple[int, int]]) -> tuple[np.ndarray, np.ndarray]:
    """Solve u_i + v_j = c_ij on a spanning-tree basis with u_0 = 0."""
    m, n = cost.shape
    u = np.full(m, np.nan)
    v = np.full(n, np.nan)
    u[0] = 0.0
    rows: dict[int, list[int]] = {}
    cols: dict[int, list[int]] = {}
    for i, j in basis:
        rows.setdefault(i, []).append(j)
        cols.setdefault(j, []).append(i)
    stack = [("r", 0)]
    while stack:
        kind, k = stack.pop()
        if kind == "r":
            for j in rows.get(k, ()):
                if np.isnan(v[j]):
                    v[j] = cost[k, j] - u[k]
                    stack.append(("c", j))
        else:
            for i in cols.get(k, ()):
                if np.isnan(u[i]):
                    u[i] = cost[i, k] - v[k]
                    stack.append(("r", i))
    return u, v


def _find_cycle(basis: list[tuple[int, int]], enter: tuple[int, int]) -> list[tuple[int, int]]:
    """Alternating row/column cycle through ``enter`` in basis + {enter}."""
    cells = basis + [enter]
    rows: dict[int, list[tuple[int, int]]] = {}
    cols: dict[int, list[tuple[int, int]]] = {}
    for c in cells:
        rows.setdefault(c[0], []).append(c)
        cols.setdefault(c[1], []).append(c)

    # depth-first search alternating row and column moves
    def dfs(path: list[tuple[int, int]], along_row: bool):
        cur = path[-1]
        nbrs = rows[cur[0]] if along_row else cols[cur[1]]
        for nb in nbrs:
            if nb == cur:
                continue
            if nb == enter and len(path) >= 4 and len(path) % 2 == 0:
                return path
            if nb in path:
                continue
            res = dfs(path + [nb], not along_row)
            if res is not None:
                return res
        return None

    cyc = dfs([enter], True)
    if cyc is None:
        raise RuntimeError("no pivot cycle found")
    return cyc


def w2_lp_oracle(mu: GridMeasure, nu: GridMeasure, return_plan: bool = False):
    """Discrete Kantorovich problem solved by the transportation simplex.

    Independent of the quantile formula: the plan is seeded by the north-west
    corner rule and improved by u-v (MODI) pivots with Bland's rule until all
    reduced costs are nonnegative.

    Parameters
    ----------
    mu, nu : GridMeasure
        Instances with ``m * n <= 64`` only.
    return_plan : bool
        Also return the optimal plan.
    """
    m, n = mu.size, nu.size
    if m * n > 64:
        raise InstanceTooLarge(f"m*n = {m * n} exceeds 64")
    cost = (mu.support[:, None] - nu.support[None, :]) ** 2
    x, basis = _nw_corner_basis(mu.weights, nu.weights)
    for _ in range(10_000):
        u, v = _potentials(cost, basis)
        reduced = cost - u[:, None] - v[None, :]
        enter = None
        in_basis = set(basis)
        for i in range(m):
            for j in range(n):
                if (i, j) not in in_basis and reduced[i, j] < -1e-13:
                    enter = (i, j)
                    break
            if enter is not None:
                break
        if enter is None:
            break
        cyc = _find_cycle(basis, enter)
        minus = cyc[1::2]
        theta = min(x[c] for c in minus)
        leave = min((c for c in minus if x[c] == theta))
        for k, c in enumerate(cyc):
            x[c] += theta if k % 2 == 0 else -theta
        x[leave] = 0.0
        basis = [c for c in basis if c != leave] + [enter]
    val = float(np.sum(cost * x))
    return (val, x) if return_plan else val


def w2_sq_subgradient(mu: GridMeasure, sigma: GridMeasure) -> np.ndarray:
    """Kantorovich potential of ``W_2^2(., sigma)`` at ``mu``.

    Returns ``psi`` with ``W_2^2(mu', sigma) >= W_2^2(mu, sigma) + <psi, mu' - mu>``
    for every ``mu'`` on the support of ``mu``. The potential comes from the
    north-west corner staircase, which is an optimal basis for the convex
    quadratic cost on sorted supports; ties advance the ``mu`` block first.
    """
    cost = (mu.support[:, None] - sigma.support[None, :]) ** 2
    _, basis = _nw_corner_basis(mu.weights, sigma.weights)
    u, _ = _potentials(cost, basis)
    return u


def _w2_metric(a: GridMeasure, b: GridMeasure) -> float:
    return w2_distance_1d(a, b)


register_backend(BACKEND, ProductMetric(_w2_metric, _w2_metric))


def _kl(w: np.ndarray, ref: np.ndarray) -> float:
    pos = w > 0
    return float(np.sum(w[pos] * np.log(w[pos] / ref[pos])))


# ---------------------------------------------------------------- objective


def kernel_matrix(family: str, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Evaluate a named interaction kernel on two supports."""
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    if family == "x*y":
        return X * Y
    if family == "-(x-y)^2":
        return -((X - Y) ** 2)
    if family == "|x-y|":
        return np.abs(X - Y)
    raise ValueError(f"unknown kernel family {family!r}; expected 'x*y', '-(x-y)^2' or '|x-y|'")


@dataclass(frozen=True, eq=False)
class EntropicBilinearObjective(BivariateObjective):
    """``L(mu, nu) = mu^T ell nu + (KL(mu|rho_x) - KL(nu|rho_y)) / beta``.

    ``beta = inf`` drops the entropies and leaves the bilinear game, with
    declared modulus 0. Otherwise the declared modulus is
    ``1 / (beta * w_max)`` where ``w_max`` is the larger squared support
    diameter.
    """

    ell: np.ndarray
    beta: float
    rho_x: GridMeasure
    rho_y: GridMeasure
    lam_override: float | None = None

    backend = BACKEND

    def __post_init__(self):
        ell = np.array(self.ell, dtype=float)
        if ell.shape != (self.rho_x.size, self.rho_y.size):
            raise SupportMismatch(f"kernel shape {ell.shape} does not match supports "
                                  f"({self.rho_x.size}, {self.rho_y.size})")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if math.isfinite(self.beta) and (np.any(self.rho_x.weights <= 0) or np.any(self.rho_y.weights <= 0)):
            raise ValueError("reference weights must be strictly positive")
        ell.setflags(write=False)
        object.__setattr__(self, "ell", ell)

    @property
    def w_max(self) -> float:
        dx = self.rho_x.support[-1] - self.rho_x.support[0]
        dy = self.rho_y.support[-1] - self.rho_y.support[0]
        return float(max(dx, dy) ** 2)

    @property
    def inv_beta(self) -> float:
        return 0.0 if math.isinf(self.beta) else 1.0 / self.beta

    @property
    def modulus(self) -> ConvexityModulus:  # type: ignore[override]
        if self.lam_override is not None:
            return ConvexityModulus(self.lam_override)
        return ConvexityModulus(self.inv_beta / self.w_max)

    def _check(self, mu: GridMeasure, nu: GridMeasure):
        if mu.size != self.rho_x.size or nu.size != self.rho_y.size or \
                not np.array_equal(mu.support, self.rho_x.support) or \
                not np.array_equal(nu.support, self.rho_y.support):
            raise SupportMismatch("measures must live on the objective's supports")

    def evaluate(self, mu: GridMeasure, nu: GridMeasure) -> float:
        return entropic_objective_eval(self, mu, nu)

    def in_domain_x(self, mu) -> bool:
        return isinstance(mu, GridMeasure) and np.array_equal(mu.support, self.rho_x.support)

    def in_domain_y(self, nu) -> bool:
        return isinstance(nu, GridMeasure) and np.array_equal(nu.support, self.rho_y.support)

    def decomposition(self):
        ib = self.inv_beta
        return (lambda mu, nu: float(mu.weights @ self.ell @ nu.weights),
                lambda mu: ib * _kl(mu.weights, self.rho_x.weights),
                lambda nu: -ib * _kl(nu.weights, self.rho_y.weights))

    def partial_gradients(self, z: ProductPoint):
        return entropic_partial_gradients(self, z.x, z.y)

    def first_variations(self, mu: GridMeasure, nu: GridMeasure) -> tuple[np.ndarray, np.ndarray]:
        """Gradients in weight space without the boundary check (floored logs)."""
        ib = self.inv_beta
        gx = self.ell @ nu.weights
        gy = self.ell.T @ mu.weights
        if ib:
            gx = gx + ib * (np.log(np.maximum(mu.weights, BOUNDARY_FLOOR) / self.rho_x.weights) + 1.0)
            gy = gy - ib * (np.log(np.maximum(nu.weights, BOUNDARY_FLOOR) / self.rho_y.weights) + 1.0)
        return gx, gy

    # exact extremal values over the simplices
    def inf_x(self, nu: GridMeasure) -> float:
        s = self.ell @ nu.weights
        if not self.inv_beta:
            return float(s.min())
        return float(-self.inv_beta * logsumexp(-self.beta * s, b=self.rho_x.weights)) - \
            self.inv_beta * _kl(nu.weights, self.rho_y.weights)

    def sup_y(self, mu: GridMeasure) -> float:
        s = self.ell.T @ mu.weights
        if not self.inv_beta:
            return float(s.max())
        return float(self.inv_beta * logsumexp(self.beta * s, b=self.rho_y.weights)) + \
            self.inv_beta * _kl(mu.weights, self.rho_x.weights)

    def ni_gap(self, z: ProductPoint, feasible_box=None) -> float:
        """Exact gap over the simplices via the Gibbs variational formula."""
        self._check(z.x, z.y)
        return max(self.sup_y(z.x) - self.inf_x(z.y), 0.0)

    def local_slope(self, z: ProductPoint) -> float:
        """Transport slope of the first variations.

        ``sqrt(sum_e m_e |grad g|_e^2)`` over grid edges ``e``, with
        ``m_e`` the mean mass of the two endpoints, summed over both
        factors. It vanishes exactly where the first variations are constant
        on the support.
        """
        gx, gy = self.first_variations(z.x, z.y)
        total = 0.0
        for g, meas in ((gx, z.x), (gy, z.y)):
            h = np.diff(meas.support)
            me = 0.5 * (meas.weights[:-1] + meas.weights[1:])
            total += float(np.sum(me * (np.diff(g) / h) ** 2))
        return math.sqrt(total)

    def curve_provider(self, concentration: float = 1.0) -> CurveProvider:
        sx, sy = self.rho_x.support, self.rho_y.support

        def mix(a: GridMeasure, b: GridMeasure, t: float) -> GridMeasure:
            return a.with_weights((1 - t) * a.weights + t * b.weights)

        return CurveProvider(
            sample_x=lambda rng: GridMeasure(sx, rng.dirichlet(np.full(sx.size, concentration))),
            sample_y=lambda rng: GridMeasure(sy, rng.dirichlet(np.full(sy.size, concentration))),
            interp_x=mix, interp_y=mix)

    def resolvent(self, anchor: ProductPoint, tau: float, tol: float, max_iter: int = 500_000,
                  warm_start=None) -> ResolventResult:
        return wasserstein_resolvent(self, anchor, tau, tol, max_iter)

    def saddle_point(self, tol: float = 1e-12) -> ProductPoint:
        return entropic_saddle(self, tol)


def entropic_objective_eval(obj: EntropicBilinearObjective, mu: GridMeasure, nu: GridMeasure) -> float:
    """``mu^T ell nu + (KL(mu|rho_x) - KL(nu|rho_y)) / beta`` with ``0 log 0 = 0``."""
    obj._check(mu, nu)
    val = float(mu.weights @ obj.ell @ nu.weights)
    if obj.inv_beta:
        val += obj.inv_beta * (_kl(mu.weights, obj.rho_x.weights) - _kl(nu.weights, obj.rho_y.weights))
    return val


def entropic_partial_gradients(obj: EntropicBilinearObjective, mu: GridMeasure,
                               nu: GridMeasure, floor: float = BOUNDARY_FLOOR):
    """Weight-space gradients ``(ell nu + (log(mu/rho_x)+1)/beta, ell^T mu - (log(nu/rho_y)+1)/beta)``.

    Raises
    ------
    BoundaryPoint
        If some weight is below ``floor`` while entropies are active.
    """
    obj._check(mu, nu)
    if obj.inv_beta and (mu.weights.min() < floor or nu.weights.min() < floor):
        raise BoundaryPoint("gradient requested at the simplex boundary")
    return obj.first_variations(mu, nu)


# ----------------------------------------------------------------- resolvent


def _lifted_gap_value(obj, mu, nu, tau, P, Q):
    """Frank-Wolfe gap of the lifted problem, recomputed in numpy."""
    cx = (obj.rho_x.support[:, None] - obj.rho_x.support[None, :]) ** 2 / (2 * tau)
    cy = (obj.rho_y.support[:, None] - obj.rho_y.support[None, :]) ** 2 / (2 * tau)
    a, b = P.sum(1), Q.sum(1)
    ga, gb = obj.first_variations(GridMeasure(obj.rho_x.support, a / a.sum()),
                                  GridMeasure(obj.rho_y.support, b / b.sum()))
    GP = ga[:, None] + cx
    GQ = gb[:, None] - cy
    return float(np.sum(GP * P) - mu @ GP.min(0) + nu @ GQ.max(0) - np.sum(GQ * Q))


def wasserstein_resolvent(obj: EntropicBilinearObjective, anchor: ProductPoint, tau: float,
                          tol: float = 1e-10, max_iter: int = 500_000) -> ResolventResult:
    """Saddle point of ``L(mu', nu') + (W_2^2(mu', mu) - W_2^2(nu', nu)) / (2 tau)``.

    The transport terms are lifted to couplings: ``mu'`` is the row marginal
    of a plan ``P`` whose columns carry the anchor weights, likewise for
    ``nu'`` and ``Q``. The lifted objective is smooth in ``(P, Q)`` and is
    solved by entropic mirror-prox with column-wise normalization. Its
    Frank-Wolfe gap bounds the gap of the original problem from above and is
    the stopping rule. With ``beta = inf`` the lifted problem is a bilinear
    game over two transport polytopes and is solved as a pair of linear
    programs instead.

    Returns
    -------
    ResolventResult
        ``gap`` is the certified upper bound on the restricted gap.

    Raises
    ------
    NoConvergence
        When the gap is still above ``tol`` after ``max_iter`` iterations.
    """
    tau = obj.modulus.check_tau(tau)
    mu, nu = anchor.x, anchor.y
    obj._check(mu, nu)
    if not obj.inv_beta:
        return _bilinear_resolvent(obj, anchor, tau, tol)
    sx, sy = obj.rho_x.support, obj.rho_y.support
    cx = (sx[:, None] - sx[None, :]) ** 2 / (2 * tau)
    cy = (sy[:, None] - sy[None, :]) ** 2 / (2 * tau)
    m, n = sx.size, sy.size
    with np.errstate(divide="ignore"):
        P0 = 0.5 * np.diag(mu.weights) + 0.5 * np.outer(np.full(m, 1.0 / m), mu.weights)
        Q0 = 0.5 * np.diag(nu.weights) + 0.5 * np.outer(np.full(n, 1.0 / n), nu.weights)
        logP, logQ = np.log(P0), np.log(Q0)
    eta = 1.0 / (obj.inv_beta + float(np.abs(obj.ell).max()))
    ell, ib = obj.ell, obj.inv_beta
    lrx, lry = np.log(obj.rho_x.weights), np.log(obj.rho_y.weights)
    mw, nw = mu.weights.copy(), nu.weights.copy()
    # the anchor itself is a candidate: grid steps below the transport threshold do not move
    P, Q = np.diag(mw), np.diag(nw)
    best = (P, Q, _lifted_gap_value(obj, mw, nw, tau, P, Q))
    total = 0
    chunk = POLISH_CHUNK
    while best[2] > EXACT_GAP and total < max_iter:
        budget = min(chunk, max_iter - total)
        stage_tol = max(tol, POLISH_START) if total == 0 else max(tol * 1e-3, 0.01 * best[2])
        logP, logQ, gap_mp, iters, eta = _kernels.lifted_mirror_prox(
            ell, ib, lrx, lry, cx, cy, mw, nw, logP, logQ, eta, stage_tol, budget)
        total += iters
        Pm, Qm = np.exp(logP), np.exp(logQ)
        if gap_mp < best[2]:
            best = (Pm, Qm, gap_mp)
        polished = False
        for Pn, Qn in _polish_candidates(obj, mw, nw, cx, cy, Pm.sum(1), Qm.sum(1)):
            gap_n = _lifted_gap_value(obj, mw, nw, tau, Pn, Qn)
            if gap_n <= max(best[2], EXACT_GAP):
                best = (Pn, Qn, gap_n)
                polished = gap_n <= tol
            if gap_n <= EXACT_GAP:
                break
        if polished or (best[2] <= tol and total >= max_iter):
            break
        chunk *= 2
    P, Q, gap = best
    iters = total
    a, b = P.sum(1), Q.sum(1)
    point = ProductPoint(GridMeasure(sx, a / a.sum()), GridMeasure(sy, b / b.sum()), BACKEND)
    result = ResolventResult(point, max(float(gap), 0.0), int(iters), "lifted-mirror-prox+newton", tol)
    if not gap <= tol:
        raise NoConvergence(f"resolvent gap {gap:.3e} above tol {tol:.1e} after {iters} iterations",
                            best=result, gap=float(gap), iterations=int(iters))
    return result


def _monotone_plan(rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    lengths, ia, ib = _quantile_blocks(rows / rows.sum(), cols)
    plan = np.zeros((rows.size, cols.size))
    np.add.at(plan, (ia, ib), lengths)
    return plan


PRUNE_LEVELS = (0.0, 1e-12, 1e-9, 1e-6, 1e-4, 1e-2)


def _polish_candidates(obj, mu, nu, cx, cy, a, b):
    """Newton-polished plans for several pruning levels of the guessed supports.

    At the solution each plan is the monotone coupling between its row
    marginal and the anchor, so its support is the staircase of the current
    marginals. Round-off leaves cells of negligible mass on that staircase;
    they are pruned at a few relative levels and each guess is handed to
    :func:`_newton_on_support`. A successful solve is re-supported from its
    own marginals once more.
    """
    Pm, Qm = _monotone_plan(a, mu), _monotone_plan(b, nu)
    seen = set()
    for level in PRUNE_LEVELS:
        SP = tuple(zip(*np.nonzero((Pm > level * mu[None, :]) & (mu[None, :] > 0))))
        SQ = tuple(zip(*np.nonzero((Qm > level * nu[None, :]) & (nu[None, :] > 0))))
        if (SP, SQ) in seen:
            continue
        seen.add((SP, SQ))
        out = _newton_on_support(obj, mu, nu, cx, cy, SP, SQ, Pm, Qm)
        if out is None:
            continue
        yield out
        P, Q = out
        P2, Q2 = _monotone_plan(P.sum(1), mu), _monotone_plan(Q.sum(1), nu)
        SP2 = tuple(zip(*np.nonzero((P2 > 1e-13 * mu[None, :]) & (mu[None, :] > 0))))
        SQ2 = tuple(zip(*np.nonzero((Q2 > 1e-13 * nu[None, :]) & (nu[None, :] > 0))))
        if (SP2, SQ2) not in seen:
            seen.add((SP2, SQ2))
            out = _newton_on_support(obj, mu, nu, cx, cy, SP2, SQ2, P2, Q2)
            if out is not None:
                yield out


def _newton_on_support(obj, mu, nu, cx, cy, SP, SQ, Pm, Qm, max_newton: int = 80):
    """Damped Newton on the lifted stationarity system with given supports.

    Unknowns are the plan masses on the support cells and one potential per
    anchor atom; equations are equality of the reduced gradient with the
    potential on every support cell plus the column-mass constraints, a
    square system. Cells whose mass is driven to zero leave the support
    (an active-set rule). Returns ``None`` when a plan row would lose all
    its mass or Newton does not reach round-off.
    """
    m, n = mu.size, nu.size
    ell, ib = obj.ell, obj.inv_beta
    lrx, lry = np.log(obj.rho_x.weights), np.log(obj.rho_y.weights)
    SP, SQ = list(SP), list(SQ)
    p_init = {c: Pm[c] for c in SP}
    q_init = {c: Qm[c] for c in SQ}
    for _restart in range(12):
        pi = np.array([c[0] for c in SP]); pj = np.array([c[1] for c in SP])
        qi = np.array([c[0] for c in SQ]); qj = np.array([c[1] for c in SQ])
        if np.unique(pi).size < m or np.unique(qi).size < n:
            return None  # entropic marginals are strictly positive
        sp, sq = pi.size, qi.size
        cols_p, jp = np.unique(pj, return_inverse=True)
        cols_q, jq = np.unique(qj, return_inverse=True)
        npv = sp + cols_p.size
        N = npv + sq + cols_q.size
        Rp = np.zeros((m, sp)); Rp[pi, np.arange(sp)] = 1.0
        Cp = np.zeros((cols_p.size, sp)); Cp[jp, np.arange(sp)] = 1.0
        Rq = np.zeros((n, sq)); Rq[qi, np.arange(sq)] = 1.0
        Cq = np.zeros((cols_q.size, sq)); Cq[jq, np.arange(sq)] = 1.0
        p = np.maximum(np.array([p_init[c] for c in SP]), 1e-300)
        q = np.maximum(np.array([q_init[c] for c in SQ]), 1e-300)
        p *= (mu[cols_p] / (Cp @ p))[jp]
        q *= (nu[cols_q] / (Cq @ q))[jq]

        def grads(p, q):
            a, b = Rp @ p, Rq @ q
            ga = ell @ b + ib * (np.log(a) - lrx + 1.0)
            gb = ell.T @ a - ib * (np.log(b) - lry + 1.0)
            return a, b, ga, gb

        a, b, ga, gb = grads(p, q)
        alpha = (Cp @ (ga[pi] + cx[pi, pj])) / Cp.sum(1)
        gamma = (Cq @ (gb[qi] - cy[qi, qj])) / Cq.sum(1)
        mu_c, nu_c = mu[cols_p], nu[cols_q]
        J = np.zeros((N, N))
        J[:sp, sp:npv] = -Cp.T
        J[:sp, npv:npv + sq] = ell[pi, :] @ Rq
        J[sp:npv, :sp] = Cp
        J[npv:npv + sq, :sp] = ell[:, qi].T @ Rp
        J[npv:npv + sq, npv + sq:] = -Cq.T
        J[npv + sq:, npv:npv + sq] = Cq
        dropped = False
        for _ in range(max_newton):
            F = np.concatenate([ga[pi] + cx[pi, pj] - alpha[jp], Cp @ p - mu_c,
                                gb[qi] - cy[qi, qj] - gamma[jq], Cq @ q - nu_c])
            if np.max(np.abs(F)) < 1e-14:
                P = np.zeros((m, m)); P[pi, pj] = p
                Q = np.zeros((n, n)); Q[qi, qj] = q
                return P, Q
            J[:sp, :sp] = (ib / a)[pi][:, None] * Rp[pi, :]
            J[npv:npv + sq, npv:npv + sq] = -(ib / b)[qi][:, None] * Rq[qi, :]
            step = np.linalg.lstsq(J, -F, rcond=None)[0]
            dp, dal = step[:sp], step[sp:npv]
            dq, dga = step[npv:npv + sq], step[npv + sq:]
            # cells that a full step would empty leave the support
            hit_p = (p + dp <= 0) & (dp < 0)
            hit_q = (q + dq <= 0) & (dq < 0)
            if np.any(hit_p) or np.any(hit_q):
                p_init = {c: v for c, v, h in zip(SP, p, hit_p) if not h}
                q_init = {c: v for c, v, h in zip(SQ, q, hit_q) if not h}
                SP = [c for c, h in zip(SP, hit_p) if not h]
                SQ = [c for c, h in zip(SQ, hit_q) if not h]
                dropped = True
                break
            p, alpha, q, gamma = p + dp, alpha + dal, q + dq, gamma + dga
            a, b, ga, gb = grads(p, q)
        if not dropped:
            return None
    return None


def _bilinear_resolvent(obj, anchor, tau, tol) -> ResolventResult:
    mu, nu = anchor.x.weights, anchor.y.weights
    sx, sy = obj.rho_x.support, obj.rho_y.support
    m, n = sx.size, sy.size
    cx = (sx[:, None] - sx[None, :]) ** 2 / (2 * tau)
    cy = (sy[:, None] - sy[None, :]) ** 2 / (2 * tau)
    P = _lp_best_response(obj.ell, cx, cy, mu, nu)
    Q = _lp_best_response(-obj.ell.T, cy, cx, nu, mu)
    gap = _lifted_gap_value(obj, mu, nu, tau, P, Q)
    a, b = P.sum(1), Q.sum(1)
    point = ProductPoint(GridMeasure(sx, a / a.sum()), GridMeasure(sy, b / b.sum()), BACKEND)
    result = ResolventResult(point, max(gap, 0.0), 1, "transport-lp", tol)
    if not gap <= tol:
        raise NoConvergence(f"LP resolvent gap {gap:.3e} above tol {tol:.1e}", best=result,
                            gap=gap, iterations=1)
    return result


def _lp_best_response(ell, cx, cy, mu, nu) -> np.ndarray:
    """Minimizing plan of ``min_P max_Q (P1)^T ell (Q1) + <cx,P> - <cy,Q>``.

    The inner maximum over plans with column sums ``nu`` equals
    ``sum_j nu_j max_i ((ell^T P1)_i - cy_ij)``, which an epigraph variable
    per column turns into a linear program.
    """
    m, n = ell.shape
    nv = m * m + n
    c = np.concatenate([cx.ravel(), nu])
    # P_kl sits at k*m + l; row sum a_k = sum_l P_kl
    A_eq = np.zeros((m, nv))
    for l in range(m):
        A_eq[l, [k * m + l for k in range(m)]] = 1.0
    rows = []
    rhs = []
    for j in range(n):
        for i in range(n):
            r = np.zeros(nv)
            for k in range(m):
                r[k * m:(k + 1) * m] = ell[k, i]
            r[m * m + j] = -1.0
            rows.append(r)
            rhs.append(cy[i, j])
    bounds = [(0, None)] * (m * m) + [(None, None)] * n
    res = linprog(c, A_ub=np.array(rows), b_ub=np.array(rhs), A_eq=A_eq, b_eq=mu, bounds=bounds,
                  method="highs", options={"primal_feasibility_tolerance": 1e-10,
                                           "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise NoConvergence(f"transport LP failed: {res.message}")
    P = np.clip(res.x[: m * m].reshape(m, m), 0.0, None)
    col = P.sum(0)
    scale = np.divide(mu, col, out=np.zeros_like(mu), where=col > 0)
    return P * scale[None, :]


def entropic_saddle(obj: EntropicBilinearObjective, tol: float = 1e-12,
                    max_iter: int = 200_000) -> ProductPoint:
    """Saddle point of the entropic objective on the simplices.

    Solved by the simplex mirror-prox of :func:`gdaflow.saddle.solve_saddle`
    with the exact gap as stopping rule.
    """
    from .saddle import SaddleProblem, Simplex, solve_saddle

    if not obj.inv_beta:
        raise ValueError("the bilinear game has no unique saddle in general")
    sx, sy = obj.rho_x.support, obj.rho_y.support

    def value(a, b):
        return entropic_objective_eval(obj, GridMeasure(sx, a), GridMeasure(sy, b))

    def gx(a, b):
        return obj.first_variations(GridMeasure(sx, a / a.sum()), GridMeasure(sy, b / b.sum()))[0]

    def gy(a, b):
        return obj.first_variations(GridMeasure(sx, a / a.sum()), GridMeasure(sy, b / b.sum()))[1]

    def gap(a, b):
        return obj.ni_gap(ProductPoint(GridMeasure(sx, a / a.sum()), GridMeasure(sy, b / b.sum()), BACKEND))

    problem = SaddleProblem(value=value, grad_x=gx, grad_y=gy, lam=obj.modulus.lam,
                            x0=obj.rho_x.weights.copy(), y0=obj.rho_y.weights.copy(),
                            set_x=Simplex(), set_y=Simplex(), gap=gap,
                            lipschitz=obj.inv_beta + float(np.abs(obj.ell).max()))
    cert = solve_saddle(problem, tol, max_iter)
    a, b = cert.point.x, cert.point.y
    return ProductPoint(GridMeasure(sx, a / a.sum()), GridMeasure(sy, b / b.sum()), BACKEND)


def grid_point(support_x, weights_x, support_y, weights_y) -> ProductPoint:
    return ProductPoint(GridMeasure(support_x, weights_x), GridMeasure(support_y, weights_y), BACKEND)
