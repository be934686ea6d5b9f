import math

import numpy as np
import pytest

from gdaflow.core import (
    BackendMismatch,
    CallableObjective,
    ConvexityModulus,
    IndeterminateForm,
    NonpositiveTau,
    ProductPoint,
    RegularizedObjective,
    StepTooLarge,
    extended_sum,
    product_distance_sq,
    regularized_objective,
    validate_convex_concavity,
)
from gdaflow.hilbert import gaussian_curves, hilbert_point
from gdaflow.wasserstein import dirac, grid_point

bilinear = CallableObjective(lambda x, y: float(x[0] * y[0]))


def h(x, y):
    return hilbert_point(x, y)


class TestExtendedSum:
    def test_finite(self):
        assert extended_sum(1.0, 2.5, -0.5) == 3.0

    def test_single_infinity_dominates(self):
        assert extended_sum(1.0, math.inf) == math.inf
        assert extended_sum(-math.inf, 3.0, -math.inf) == -math.inf

    def test_opposite_infinities_raise(self):
        with pytest.raises(IndeterminateForm):
            extended_sum(math.inf, -math.inf)

    def test_nan_raises(self):
        with pytest.raises(IndeterminateForm):
            extended_sum(1.0, math.nan)


class TestModulus:
    def test_negative_lambda(self):
        m = ConvexityModulus(-2.0)
        assert m.lambda_minus == 2.0
        assert m.tau_max == 0.5

    def test_nonnegative_lambda(self):
        assert ConvexityModulus(0.0).tau_max == math.inf
        assert ConvexityModulus(3.0).lambda_minus == 0.0

    def test_check_tau(self):
        m = ConvexityModulus(-1.0)
        assert m.check_tau(0.5) == 0.5
        with pytest.raises(StepTooLarge):
            m.check_tau(1.0)
        with pytest.raises(NonpositiveTau):
            m.check_tau(0.0)


class TestRegularizedObjective:
    def test_symmetric_terms_cancel(self):
        assert regularized_objective(bilinear, h(0, 0), 1.0, h(1, 1)) == 1.0

    def test_x_move_only(self):
        assert regularized_objective(bilinear, h(0, 0), 1.0, h(2, 0)) == 2.0

    def test_probe_equals_anchor(self):
        assert regularized_objective(bilinear, h(1, 1), 0.5, h(1, 1)) == 1.0

    def test_nonpositive_tau(self):
        with pytest.raises(NonpositiveTau):
            regularized_objective(bilinear, h(0, 0), 0.0, h(1, 1))

    def test_backend_mismatch(self):
        g = grid_point([0, 1], [1, 0], [0, 1], [1, 0])
        with pytest.raises(BackendMismatch):
            regularized_objective(bilinear, h(0, 0), 1.0, g)

    def test_infinite_value_propagates(self):
        phi = CallableObjective(lambda x, y: math.inf)
        assert regularized_objective(phi, h(0, 0), 1.0, h(1, 2)) == math.inf

    def test_object_form_modulus(self):
        reg = RegularizedObjective(CallableObjective(bilinear.func, lam=-0.5), h(0, 0), 0.25)
        assert reg.modulus.lam == 3.5
        assert reg.evaluate(np.array([1.0]), np.array([1.0])) == 1.0


class TestProductDistance:
    def test_identity(self):
        z = h([1.0, 2.0], [3.0])
        assert product_distance_sq(z, z) == 0.0

    def test_pythagorean(self):
        assert product_distance_sq(h(0, 0), h(3, 4)) == 25.0

    def test_grid_diracs(self):
        a = grid_point([0, 1], [1, 0], [0, 1], [1, 0])
        b = grid_point([0, 1], [0, 1], [0, 1], [0, 1])
        assert product_distance_sq(a, b) == pytest.approx(2.0, abs=1e-14)

    def test_mismatch(self):
        g = ProductPoint(dirac([0, 1], 0), dirac([0, 1], 1), "wasserstein1d")
        with pytest.raises(BackendMismatch):
            product_distance_sq(h(0, 0), g)


class TestValidateConvexConcavity:
    def test_bilinear_lambda_zero(self):
        rep = validate_convex_concavity(bilinear, gaussian_curves(1, 1), samples=100, seed=0)
        assert rep.max_violation <= 1e-12

    def test_quadratic_lambda_one(self):
        phi = CallableObjective(lambda x, y: float(0.5 * x[0] ** 2 + x[0] * y[0] - 0.5 * y[0] ** 2), lam=1.0)
        rep = validate_convex_concavity(phi, gaussian_curves(1, 1), samples=100, seed=0)
        assert rep.max_violation <= 1e-12

    def test_concave_in_x_is_reported(self):
        phi = CallableObjective(lambda x, y: float(-x[0] ** 2 + x[0] * y[0]))
        rep = validate_convex_concavity(phi, gaussian_curves(1, 1), samples=50, seed=0)
        assert rep.convex_violation > 0
        assert rep.worst_pair[0] == "x"

    def test_regularized_inherits_modulus(self):
        base = CallableObjective(lambda x, y: float(0.5 * x[0] ** 2 + x[0] * y[0] - 0.5 * y[0] ** 2), lam=1.0)
        reg = RegularizedObjective(base, h(0.3, -0.2), 0.5)
        rep = validate_convex_concavity(reg, gaussian_curves(1, 1), samples=100, seed=3)
        assert rep.max_violation <= 1e-10

    def test_seeded(self):
        a = validate_convex_concavity(bilinear, gaussian_curves(1, 1), samples=10, seed=7)
        b = validate_convex_concavity(bilinear, gaussian_curves(1, 1), samples=10, seed=7)
        assert a.convex_violation == b.convex_violation
