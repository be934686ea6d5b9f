import math

import numpy as np
import pytest
import scipy.linalg

from gdaflow.core import StepTooLarge
from gdaflow.hilbert import (
    BoxIndicator,
    CompositeSaddleObjective,
    L1Penalty,
    QuadraticSaddleObjective,
    SquaredNorm,
    ZeroTerm,
    brute_force_saddle,
    exact_linear_flow,
    expm,
    hilbert_point,
    quadratic_resolvent,
    smallest_eigenvalue,
)

xy = QuadraticSaddleObjective.scalar()
tight = QuadraticSaddleObjective.scalar(A=1.0, B=1.0)


def coords(z):
    return np.concatenate([z.x, z.y])


class TestQuadratic:
    def test_default_lambda_is_min_eigenvalue(self):
        obj = QuadraticSaddleObjective(np.diag([2.0, 3.0]), [0.0, 0.0], np.ones((2, 1)), [[0.5]], [0.0])
        assert obj.lam == 0.5
        assert obj.dims == (2, 1)

    def test_overdeclared_lambda_rejected(self):
        with pytest.raises(ValueError):
            QuadraticSaddleObjective.scalar(A=1.0, B=1.0, lam=1.5)

    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError):
            QuadraticSaddleObjective([[1.0, 2.0], [0.0, 1.0]], [0, 0], np.eye(2), np.eye(2), [0, 0])

    def test_saddle_of_tight_instance_with_linear_term(self):
        obj = QuadraticSaddleObjective.scalar(A=1.0, a=1.0, B=1.0)
        np.testing.assert_allclose(coords(obj.saddle_point()), [-0.5, -0.5], atol=1e-15)

    def test_ni_gap(self):
        assert tight.ni_gap(hilbert_point(1, 1)) == pytest.approx(2.0, abs=1e-14)
        assert xy.ni_gap(hilbert_point(1, 0)) == math.inf
        assert xy.ni_gap(hilbert_point(0, 0)) == 0.0

    def test_ni_gap_on_box(self):
        from gdaflow.saddle import Box
        # sup_{|y|<=1} y - inf_{|x|<=1} 0 = 1
        assert xy.ni_gap(hilbert_point(1, 0), (Box(-1, 1), Box(-1, 1))) == pytest.approx(1.0)

    def test_smallest_eigenvalue_matches_scipy(self):
        M = np.array([[2.0, 1.0], [1.0, 2.0]])
        assert smallest_eigenvalue(M) == pytest.approx(min(scipy.linalg.eigvalsh(M)), abs=1e-14)


class TestResolvent:
    def test_bilinear(self):
        z = quadratic_resolvent(xy, hilbert_point(1, 0), 1.0)
        np.testing.assert_allclose(coords(z), [0.5, 0.5], atol=1e-15)

    def test_tight(self):
        r = tight.resolvent(hilbert_point(1, 1), 1.0)
        np.testing.assert_allclose(coords(r.point), [0.2, 0.6], atol=1e-15)
        assert r.gap <= 1e-30

    def test_step_too_large(self):
        concave = QuadraticSaddleObjective.scalar(A=-1.0, B=1.0)
        with pytest.raises(StepTooLarge):
            quadratic_resolvent(concave, hilbert_point(0, 0), 1.0)

    def test_first_order_conditions_multidim(self):
        rng = np.random.default_rng(3)
        M = rng.standard_normal((3, 3))
        A = M @ M.T + 0.1 * np.eye(3)
        B = np.diag([0.3, 1.2])
        C = rng.standard_normal((3, 2))
        obj = QuadraticSaddleObjective(A, rng.standard_normal(3), C, B, rng.standard_normal(2))
        anchor = hilbert_point(rng.standard_normal(3), rng.standard_normal(2))
        tau = 0.7
        z = quadratic_resolvent(obj, anchor, tau)
        np.testing.assert_allclose(obj.grad_x(z.x, z.y) + (z.x - anchor.x) / tau, 0, atol=1e-12)
        np.testing.assert_allclose(obj.grad_y(z.x, z.y) - (z.y - anchor.y) / tau, 0, atol=1e-12)


class TestExactFlow:
    def test_quarter_turn(self):
        z = exact_linear_flow(xy, hilbert_point(1, 0), math.pi / 2)
        np.testing.assert_allclose(coords(z), [0.0, 1.0], atol=1e-14)

    def test_full_turn(self):
        z = exact_linear_flow(xy, hilbert_point(1, 0), 2 * math.pi)
        np.testing.assert_allclose(coords(z), [1.0, 0.0], atol=1e-13)

    @pytest.mark.parametrize("t", [0.3, 1.0, 2.5])
    def test_damped_rotation(self, t):
        z = exact_linear_flow(tight, hilbert_point(1, 0), t)
        np.testing.assert_allclose(coords(z), math.exp(-t) * np.array([math.cos(t), math.sin(t)]), atol=1e-14)

    def test_affine_flow_tends_to_saddle(self):
        obj = QuadraticSaddleObjective.scalar(A=1.0, a=1.0, B=1.0)
        z = exact_linear_flow(obj, hilbert_point(3, -2), 40.0)
        np.testing.assert_allclose(coords(z), [-0.5, -0.5], atol=1e-12)

    def test_expm_matches_scipy(self):
        rng = np.random.default_rng(0)
        for scale in (0.1, 1.0, 20.0):
            M = scale * rng.standard_normal((5, 5))
            np.testing.assert_allclose(expm(M), scipy.linalg.expm(M), rtol=1e-11, atol=1e-12)


class TestBruteForce:
    def test_matches_closed_form(self):
        obj = QuadraticSaddleObjective.scalar(A=1.0, a=1.0, B=1.0)
        z = brute_force_saddle(obj, ((-2, 2), (-2, 2)), grid=401)
        np.testing.assert_allclose(coords(z), [-0.5, -0.5], atol=0.01)


class TestProxTerms:
    def test_box(self):
        t = BoxIndicator(0.0, 1.0)
        np.testing.assert_array_equal(t.prox(np.array([-1.0, 0.5, 3.0]), 2.0), [0.0, 0.5, 1.0])
        assert t.value(np.array([2.0])) == math.inf

    def test_l1(self):
        np.testing.assert_allclose(L1Penalty(0.5).prox(np.array([-1.0, 0.2, 2.0]), 1.0), [-0.5, 0.0, 1.5])

    def test_squared_norm(self):
        t = SquaredNorm(2.0)
        np.testing.assert_allclose(t.prox(np.array([3.0]), 0.5), [1.5])
        assert t.strong_convexity == 2.0

    def test_zero(self):
        np.testing.assert_array_equal(ZeroTerm().prox(np.array([1.0, -2.0]), 5.0), [1.0, -2.0])


class TestComposite:
    def test_box_constrained_resolvent(self):
        obj = CompositeSaddleObjective(xy, f=BoxIndicator(0.0, math.inf))
        r = obj.resolvent(hilbert_point(-1, 0), 0.1)
        np.testing.assert_allclose(coords(r.point), [0.0, 0.0], atol=1e-12)

    def test_zero_terms_reduce_to_quadratic(self):
        obj = CompositeSaddleObjective(tight)
        r = obj.resolvent(hilbert_point(1, 1), 1.0)
        np.testing.assert_allclose(coords(r.point), [0.2, 0.6], atol=1e-10)

    def test_modulus_adds_strong_convexity(self):
        obj = CompositeSaddleObjective(xy, f=SquaredNorm(1.0), g=SquaredNorm(2.0))
        assert obj.modulus.lam == 1.0

    def test_l1_resolvent_fixed_point(self):
        obj = CompositeSaddleObjective(tight, g=L1Penalty(0.3))
        anchor = hilbert_point(0.4, -1.2)
        tau = 0.5
        z = obj.resolvent(anchor, tau).point
        # x-optimality (smooth) and y-prox fixed point
        np.testing.assert_allclose(tight.grad_x(z.x, z.y) + (z.x - anchor.x) / tau, 0, atol=1e-10)
        y_fp = L1Penalty(0.3).prox(anchor.y + tau * tight.grad_y(z.x, z.y), tau)
        np.testing.assert_allclose(z.y, y_fp, atol=1e-10)

    def test_slope_uses_minimal_subgradient(self):
        obj = CompositeSaddleObjective(xy, f=BoxIndicator(0.0, 1.0))
        # at x = 0 the normal cone is (-inf, 0]: it absorbs grad_x = 1 but not grad_x = -1
        assert obj.local_slope(hilbert_point(0, 1)) == pytest.approx(0.0)
        assert obj.local_slope(hilbert_point(0, -1)) == pytest.approx(1.0)
