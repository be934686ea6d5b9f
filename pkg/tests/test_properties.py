import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gdaflow.core import extended_sum, product_distance_sq
from gdaflow.core import regularized_objective
from gdaflow.hilbert import (
    BoxIndicator,
    CompositeSaddleObjective,
    L1Penalty,
    QuadraticSaddleObjective,
    hilbert_point,
    quadratic_resolvent,
)
from gdaflow.scheme import discrete_evi_residuals
from gdaflow.wasserstein import (
    EntropicBilinearObjective,
    GridMeasure,
    grid_point,
    kernel_matrix,
    uniform,
    w2_distance_1d,
    w2_lp_oracle,
    w2_sq_1d,
)

finite = st.floats(-5, 5, allow_nan=False)
taus = st.floats(0.01, 2.0)


@st.composite
def weights(draw, m):
    raw = draw(arrays(float, m, elements=st.floats(0.0, 1.0)))
    raw = raw + 1e-3
    return raw / raw.sum()


@st.composite
def measures(draw, support):
    return GridMeasure(support, draw(weights(len(support))))


@st.composite
def quadratics(draw, d1=2, d2=2):
    def psd(d):
        M = draw(arrays(float, (d, d), elements=st.floats(-1, 1)))
        return M @ M.T + draw(st.floats(0.0, 1.0)) * np.eye(d)
    A, B = psd(d1), psd(d2)
    C = draw(arrays(float, (d1, d2), elements=st.floats(-2, 2)))
    a = draw(arrays(float, d1, elements=st.floats(-1, 1)))
    b = draw(arrays(float, d2, elements=st.floats(-1, 1)))
    return QuadraticSaddleObjective(A, a, C, B, b)


@st.composite
def hpoints(draw, d1=2, d2=2):
    return hilbert_point(draw(arrays(float, d1, elements=finite)), draw(arrays(float, d2, elements=finite)))


GRID = np.linspace(-1.0, 1.0, 6)
OTHER = np.array([-0.5, 0.1, 0.3, 2.0])


@given(measures(GRID), measures(GRID))
def test_w2_symmetric_and_nonnegative(mu, nu):
    d = w2_distance_1d(mu, nu)
    assert d >= 0
    assert d == w2_distance_1d(nu, mu) or math.isclose(d, w2_distance_1d(nu, mu), rel_tol=1e-12, abs_tol=1e-15)


@given(measures(GRID), measures(GRID), measures(GRID))
def test_w2_triangle(a, b, c):
    assert w2_distance_1d(a, c) <= w2_distance_1d(a, b) + w2_distance_1d(b, c) + 1e-12


@given(measures(GRID), measures(OTHER))
def test_w2_quantile_matches_transport_lp(mu, nu):
    assert math.isclose(w2_sq_1d(mu, nu), w2_lp_oracle(mu, nu), rel_tol=1e-10, abs_tol=1e-13)


@given(measures(GRID))
def test_w2_identity(mu):
    assert w2_sq_1d(mu, mu) <= 1e-28


@given(st.lists(st.one_of(finite, st.just(math.inf)), min_size=1, max_size=6))
def test_extended_sum_order_free(vals):
    assert extended_sum(*vals) == extended_sum(*reversed(vals)) or \
        math.isclose(extended_sum(*vals), extended_sum(*reversed(vals)), rel_tol=1e-12, abs_tol=1e-12)


@given(quadratics(), hpoints(), taus)
def test_regularized_at_anchor_is_phi(obj, z, tau):
    assert regularized_objective(obj, z, tau, z) == obj.evaluate(z.x, z.y)


@given(quadratics(), hpoints(), taus)
def test_resolvent_first_order_conditions(obj, z, tau):
    J = quadratic_resolvent(obj, z, tau)
    scale = 1 + np.abs(np.concatenate([z.x, z.y])).max() / tau
    np.testing.assert_allclose(obj.grad_x(J.x, J.y) + (J.x - z.x) / tau, 0, atol=1e-9 * scale)
    np.testing.assert_allclose(obj.grad_y(J.x, J.y) - (J.y - z.y) / tau, 0, atol=1e-9 * scale)


@given(quadratics(), hpoints(), hpoints(), taus)
def test_resolvent_lipschitz(obj, z, w, tau):
    Jz, Jw = quadratic_resolvent(obj, z, tau), quadratic_resolvent(obj, w, tau)
    lhs = math.sqrt(product_distance_sq(Jz, Jw))
    rhs = math.sqrt(product_distance_sq(z, w)) / (1 + obj.lam * tau)
    assert lhs <= rhs * (1 + 1e-9) + 1e-12


@given(quadratics(), hpoints(), taus, st.lists(hpoints(), min_size=1, max_size=5))
def test_discrete_evi_quadratic(obj, z, tau, tests):
    J = quadratic_resolvent(obj, z, tau)
    r = discrete_evi_residuals(obj, z, J, tau, tests)
    scale = 1 + max(product_distance_sq(z, w) for w in tests) / tau
    assert r.max() <= 1e-9 * scale


@given(quadratics(1, 1), hpoints(1, 1), st.floats(0.05, 1.0))
def test_composite_resolvent_feasible_fixed_point(smooth, z, tau):
    f, g = BoxIndicator(-0.5, 0.5), L1Penalty(0.3)
    obj = CompositeSaddleObjective(smooth, f, g)
    J = obj.resolvent(z, tau, 1e-12).point
    assert -0.5 - 1e-12 <= J.x[0] <= 0.5 + 1e-12
    xf = f.prox(z.x - tau * smooth.grad_x(J.x, J.y), tau)
    yf = g.prox(z.y + tau * smooth.grad_y(J.x, J.y), tau)
    np.testing.assert_allclose(np.concatenate([J.x, J.y]), np.concatenate([xf, yf]), atol=1e-7)


SMALL_GRID = np.linspace(0.0, 1.0, 4)
ENTROPIC = EntropicBilinearObjective(kernel_matrix("x*y", SMALL_GRID, SMALL_GRID), 1.0,
                                     uniform(SMALL_GRID), uniform(SMALL_GRID))


@settings(max_examples=15)
@given(weights(4), weights(4), st.floats(0.1, 1.0))
def test_entropic_resolvent_certificate(a, b, tau):
    z = grid_point(SMALL_GRID, a, SMALL_GRID, b)
    res = ENTROPIC.resolvent(z, tau, 1e-10)
    assert res.gap <= 1e-10
    assert ENTROPIC.ni_gap(res.point) <= ENTROPIC.ni_gap(z) + 1e-12
