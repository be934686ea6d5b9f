import math

import numpy as np
import pytest

from gdaflow.core import Infeasible, NoConvergence, NotStronglyConvexConcave, ProductPoint
from gdaflow.hilbert import QuadraticSaddleObjective, hilbert_point
from gdaflow.saddle import (
    Box,
    OuterDimensionTooLarge,
    SaddleProblem,
    Simplex,
    Whole,
    marginal_y,
    nested_saddle,
    restricted_ni_gap,
    solve_saddle,
)

tight = QuadraticSaddleObjective.scalar(A=1.0, B=1.0)
shifted = QuadraticSaddleObjective.scalar(A=1.0, a=1.0, B=1.0)


def coords(z):
    return np.concatenate([np.atleast_1d(z.x), np.atleast_1d(z.y)])


def problem_without_gap(obj, **kw):
    return SaddleProblem(value=obj.evaluate, grad_x=obj.grad_x, grad_y=obj.grad_y, lam=obj.lam,
                         x0=np.zeros(obj.dims[0]), y0=np.zeros(obj.dims[1]), **kw)


class TestSets:
    def test_box_projection(self):
        np.testing.assert_array_equal(Box(-1, 1).project(np.array([-3.0, 0.2, 5.0])), [-1, 0.2, 1])

    def test_simplex(self):
        s = Simplex()
        assert s.contains(np.array([0.25, 0.75]))
        assert not s.contains(np.array([0.5, 0.6]))

    def test_whole(self):
        assert not Whole().contains(np.array([np.inf]))


class TestSolveSaddle:
    def test_shifted_tight_instance(self):
        cert = solve_saddle(shifted.saddle_problem(), tol=1e-12)
        np.testing.assert_allclose(coords(cert.point), [-0.5, -0.5], atol=2e-6)
        assert cert.gap <= 1e-12
        assert cert.method == "extragradient"

    def test_gap_certifies_distance(self):
        # lam-strong convex-concavity: gap >= lam/2 * |z - z*|^2
        cert = solve_saddle(shifted.saddle_problem(), tol=1e-10)
        d2 = float(np.sum((coords(cert.point) - [-0.5, -0.5]) ** 2))
        assert 0.5 * shifted.lam * d2 <= cert.gap + 1e-15

    def test_multidimensional_against_linear_solve(self):
        rng = np.random.default_rng(8)
        A = np.diag([1.0, 2.0, 0.5])
        B = np.array([[1.5, 0.2], [0.2, 0.7]])
        C = rng.standard_normal((3, 2))
        obj = QuadraticSaddleObjective(A, rng.standard_normal(3), C, B, rng.standard_normal(2))
        cert = solve_saddle(obj.saddle_problem(), tol=1e-12)
        np.testing.assert_allclose(coords(cert.point), coords(obj.saddle_point()), atol=1e-5)

    def test_box_constrained(self):
        # saddle of the shifted instance restricted to x in [0, 1]: x = 0, y = argmax -y^2/2 = 0
        prob = problem_without_gap(shifted, set_x=Box(0.0, 1.0))
        cert = solve_saddle(prob, tol=1e-10)
        np.testing.assert_allclose(coords(cert.point), [0.0, 0.0], atol=1e-5)

    def test_mirror_prox_on_simplex(self):
        # entropic matching pennies: uniform is the unique saddle
        M = np.array([[1.0, -1.0], [-1.0, 1.0]])

        def value(a, b):
            return float(a @ M @ b + a @ np.log(a) - b @ np.log(b))

        prob = SaddleProblem(value=value,
                             grad_x=lambda a, b: M @ b + np.log(np.maximum(a, 1e-300)) + 1,
                             grad_y=lambda a, b: M.T @ a - np.log(np.maximum(b, 1e-300)) - 1,
                             lam=1.0, x0=np.array([0.9, 0.1]), y0=np.array([0.2, 0.8]),
                             set_x=Simplex(), set_y=Simplex(), lipschitz=3.0)
        cert = solve_saddle(prob, tol=1e-10)
        assert cert.method == "mirror-prox"
        np.testing.assert_allclose(coords(cert.point), [0.5] * 4, atol=1e-4)

    def test_requires_positive_modulus(self):
        xy = QuadraticSaddleObjective.scalar()
        with pytest.raises(NotStronglyConvexConcave):
            solve_saddle(xy.saddle_problem())

    def test_budget_exhaustion_carries_best(self):
        with pytest.raises(NoConvergence) as info:
            solve_saddle(shifted.saddle_problem(x0=[50.0], y0=[-50.0]), tol=1e-14, max_iter=3)
        assert info.value.best is not None


class TestNested:
    def test_marginal_of_tight_instance(self):
        prob = problem_without_gap(tight)
        for y in (-1.5, 0.0, 0.7):
            assert marginal_y(prob, np.array([y])) == pytest.approx(-y * y, abs=1e-10)

    def test_nested_agrees_with_extragradient(self):
        nested = nested_saddle(problem_without_gap(shifted), tol=1e-10)
        direct = solve_saddle(shifted.saddle_problem(), tol=1e-12)
        np.testing.assert_allclose(coords(nested.point), coords(direct.point), atol=1e-5)

    def test_outer_dimension_limit(self):
        obj = QuadraticSaddleObjective(np.eye(1), [0.0], np.ones((1, 2)), np.eye(2), [0.0, 0.0])
        with pytest.raises(OuterDimensionTooLarge):
            nested_saddle(obj.saddle_problem())


class TestRestrictedGap:
    def test_exact_gap_callback(self):
        assert restricted_ni_gap(tight.saddle_problem(), hilbert_point(1, 1)) == pytest.approx(2.0)

    def test_sampled_gap_is_lower_bound(self):
        gap, exact = restricted_ni_gap(problem_without_gap(tight), hilbert_point(1, 1), return_flag=True)
        assert not exact
        assert gap == pytest.approx(2.0, abs=1e-8)
        assert gap <= 2.0 + 1e-12

    def test_infeasible(self):
        prob = problem_without_gap(tight, set_x=Box(-1, 1))
        with pytest.raises(Infeasible):
            restricted_ni_gap(prob, ProductPoint(np.array([3.0]), np.array([0.0]), "hilbert"))

    def test_unbounded_gap(self):
        xy = QuadraticSaddleObjective.scalar()
        assert xy.ni_gap(hilbert_point(1, 0)) == math.inf
