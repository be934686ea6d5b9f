"""Compiled inner loops for the coupling-space mirror-prox solver."""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_FLOOR = 1e-300


@njit(cache=True)
def _marginal_gradients(P, Q, ell, binv, log_rx, log_ry, cx, cy, ga, gb):
    m = P.shape[0]
    n = Q.shape[0]
    a = P.sum(axis=1)
    b = Q.sum(axis=1)
    for i in range(m):
        s = 0.0
        for j in range(n):
            s += ell[i, j] * b[j]
        if binv > 0.0:
            s += binv * (math.log(max(a[i], _FLOOR)) - log_rx[i] + 1.0)
        ga[i] = s
    for j in range(n):
        s = 0.0
        for i in range(m):
            s += ell[i, j] * a[i]
        if binv > 0.0:
            s -= binv * (math.log(max(b[j], _FLOOR)) - log_ry[j] + 1.0)
        gb[j] = s


@njit(cache=True)
def _fw_gap(P, Q, mu, nu, ga, gb, cx, cy):
    # sup over couplings of the linearized lifted objective, minus its value
    m = P.shape[0]
    n = Q.shape[0]
    gap = 0.0
    for j in range(m):
        if mu[j] <= 0.0:
            continue
        lo = math.inf
        s = 0.0
        for i in range(m):
            g = ga[i] + cx[i, j]
            s += g * P[i, j]
            if g < lo:
                lo = g
        gap += s - mu[j] * lo
    for j in range(n):
        if nu[j] <= 0.0:
            continue
        hi = -math.inf
        s = 0.0
        for i in range(n):
            g = gb[i] - cy[i, j]
            s += g * Q[i, j]
            if g > hi:
                hi = g
        gap += nu[j] * hi - s
    return gap


@njit(cache=True)
def _mirror_step(logP, base_log, g_row, c, sign, eta, mass, out_log, out):
    # multiplicative update column by column, renormalized to the anchor mass
    k = logP.shape[0]
    for j in range(logP.shape[1]):
        if mass[j] <= 0.0:
            for i in range(k):
                out_log[i, j] = -math.inf
                out[i, j] = 0.0
            continue
        hi = -math.inf
        for i in range(k):
            v = base_log[i, j] + sign * eta * g_row[i] - eta * c[i, j]
            out_log[i, j] = v
            if v > hi:
                hi = v
        tot = 0.0
        for i in range(k):
            tot += math.exp(out_log[i, j] - hi)
        shift = hi + math.log(tot) - math.log(mass[j])
        for i in range(k):
            v = out_log[i, j] - shift
            if v < -690.0:
                v = -690.0
            out_log[i, j] = v
            out[i, j] = math.exp(v)


@njit(cache=True)
def lifted_mirror_prox(ell, binv, log_rx, log_ry, cx, cy, mu, nu, logP, logQ,
                       eta, tol, max_iter):
    """Entropic mirror-prox on couplings (P, Q) with column marginals (mu, nu).

    ``cx``/``cy`` already carry the 1/(2 tau) factor. The returned gap is the
    Frank-Wolfe gap of the lifted convex-concave objective. On divergence the
    step is halved and the best iterate restored.
    """
    m = logP.shape[0]
    n = logQ.shape[0]
    P = np.exp(logP)
    Q = np.exp(logQ)
    Ph = np.empty_like(P)
    Qh = np.empty_like(Q)
    lPh = np.empty_like(P)
    lQh = np.empty_like(Q)
    lP2 = np.empty_like(P)
    lQ2 = np.empty_like(Q)
    ga = np.empty(m)
    gb = np.empty(n)
    best_gap = math.inf
    best_lP = logP.copy()
    best_lQ = logQ.copy()
    since_best = 0
    it = 0
    while it < max_iter:
        _marginal_gradients(P, Q, ell, binv, log_rx, log_ry, cx, cy, ga, gb)
        gap = _fw_gap(P, Q, mu, nu, ga, gb, cx, cy)
        if gap == gap and gap < best_gap:
            best_gap = gap
            best_lP[:, :] = logP
            best_lQ[:, :] = logQ
            since_best = 0
        else:
            since_best += 1
        if best_gap <= tol:
            break
        if gap != gap or gap > 1e3 * best_gap + 1.0 or since_best > 2000:
            eta *= 0.5
            logP[:, :] = best_lP
            logQ[:, :] = best_lQ
            P = np.exp(logP)
            Q = np.exp(logQ)
            since_best = 0
            it += 1
            continue
        # extrapolation
        _mirror_step(logP, logP, ga, cx, -1.0, eta, mu, lPh, Ph)
        _mirror_step(logQ, logQ, gb, cy, 1.0, eta, nu, lQh, Qh)
        _marginal_gradients(Ph, Qh, ell, binv, log_rx, log_ry, cx, cy, ga, gb)
        # correction from the original point
        _mirror_step(logP, logP, ga, cx, -1.0, eta, mu, lP2, P)
        _mirror_step(logQ, logQ, gb, cy, 1.0, eta, nu, lQ2, Q)
        logP[:, :] = lP2
        logQ[:, :] = lQ2
        it += 1
    return best_lP, best_lQ, best_gap, it, eta
