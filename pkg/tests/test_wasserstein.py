import math

import numpy as np
import pytest

from gdaflow.core import ProductPoint, product_distance_sq
from gdaflow.wasserstein import (
    EntropicBilinearObjective,
    GridMeasure,
    SupportMismatch,
    dirac,
    entropic_saddle,
    grid_point,
    kernel_matrix,
    monotone_coupling,
    uniform,
    w2_distance_1d,
    w2_lp_oracle,
    w2_sq_1d,
    w2_sq_subgradient,
)

SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])


def random_measure(rng, support):
    return GridMeasure(support, rng.dirichlet(np.ones(len(support))))


class TestGridMeasure:
    def test_rejects_off_simplex(self):
        with pytest.raises(ValueError):
            GridMeasure([0.0, 1.0], [0.7, 0.7])

    def test_rejects_unsorted_support(self):
        with pytest.raises(ValueError):
            GridMeasure([1.0, 0.0], [0.5, 0.5])

    def test_shape_mismatch(self):
        with pytest.raises(SupportMismatch):
            GridMeasure([0.0, 1.0, 2.0], [0.5, 0.5])

    def test_equality_by_value(self):
        assert uniform([0, 1]) == GridMeasure([0.0, 1.0], [0.5, 0.5])
        assert dirac([0, 1], 0) != dirac([0, 1], 1)


class TestTransport:
    def test_diracs(self):
        assert w2_distance_1d(dirac([0, 1], 0), dirac([0, 1], 1)) == 1.0

    def test_shifted_two_point(self):
        mu = GridMeasure([0.0, 1.0], [0.5, 0.5])
        nu = GridMeasure([1.0, 2.0], [0.5, 0.5])
        assert w2_distance_1d(mu, nu) == pytest.approx(1.0, abs=1e-15)

    def test_split_mass(self):
        # half of the mass at 0 travels to 1: W2^2 = 1/2
        mu = dirac([0, 1], 0)
        nu = uniform([0, 1])
        assert w2_sq_1d(mu, nu) == pytest.approx(0.5, abs=1e-15)

    def test_matches_lp_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            m, n = rng.integers(1, 9, size=2)
            sx = np.sort(rng.uniform(-2, 2, m)) + np.arange(m) * 1e-3
            sy = np.sort(rng.uniform(-2, 2, n)) + np.arange(n) * 1e-3
            mu, nu = random_measure(rng, sx), random_measure(rng, sy)
            assert w2_sq_1d(mu, nu) == pytest.approx(w2_lp_oracle(mu, nu), rel=1e-12, abs=1e-14)

    def test_lp_oracle_matches_highs(self):
        from scipy.optimize import linprog
        rng = np.random.default_rng(4)
        for _ in range(10):
            m, n = rng.integers(2, 9, size=2)
            sx, sy = np.linspace(-1, 1, m), np.linspace(0, 3, n)
            mu, nu = random_measure(rng, sx), random_measure(rng, sy)
            cost = ((sx[:, None] - sy[None, :]) ** 2).ravel()
            A_eq = np.vstack([np.kron(np.eye(m), np.ones(n)), np.kron(np.ones(m), np.eye(n))])
            ref = linprog(cost, A_eq=A_eq, b_eq=np.concatenate([mu.weights, nu.weights]), method="highs")
            assert w2_lp_oracle(mu, nu) == pytest.approx(ref.fun, rel=1e-10, abs=1e-13)

    def test_monotone_coupling_marginals(self):
        rng = np.random.default_rng(2)
        mu, nu = random_measure(rng, np.arange(5.0)), random_measure(rng, np.arange(7.0))
        P = monotone_coupling(mu, nu)
        np.testing.assert_allclose(P.sum(axis=1), mu.weights, atol=1e-15)
        np.testing.assert_allclose(P.sum(axis=0), nu.weights, atol=1e-15)

    def test_subgradient_inequality(self):
        rng = np.random.default_rng(5)
        s = np.linspace(0, 1, 6)
        mu, sigma = random_measure(rng, s), random_measure(rng, s)
        psi = w2_sq_subgradient(mu, sigma)
        base = w2_sq_1d(mu, sigma)
        for _ in range(200):
            other = random_measure(rng, s)
            assert w2_sq_1d(other, sigma) >= base + psi @ (other.weights - mu.weights) - 1e-12

    def test_product_distance_uses_w2(self):
        a = grid_point([0, 1], [1, 0], [0, 1], [1, 0])
        b = grid_point([0, 1], [0, 1], [0, 1], [0, 1])
        assert product_distance_sq(a, b) == pytest.approx(2.0)


class TestEntropicObjective:
    def test_uniform_swap_value(self):
        s = [0.0, 1.0]
        obj = EntropicBilinearObjective(SWAP, 1.0, uniform(s), uniform(s))
        assert obj.evaluate(uniform(s), uniform(s)) == pytest.approx(0.5, abs=1e-15)

    def test_entropy_terms(self):
        s = [0.0, 1.0]
        obj = EntropicBilinearObjective(np.zeros((2, 2)), 2.0, uniform(s), uniform(s))
        # KL(delta_0 | uniform) = log 2, weighted by 1/beta
        assert obj.evaluate(dirac(s, 0), uniform(s)) == pytest.approx(math.log(2) / 2)
        assert obj.evaluate(uniform(s), dirac(s, 0)) == pytest.approx(-math.log(2) / 2)

    def test_declared_modulus(self):
        s = np.linspace(0, 2, 5)
        obj = EntropicBilinearObjective(kernel_matrix("x*y", s, s), 4.0, uniform(s), uniform(s))
        assert obj.modulus.lam == pytest.approx(1.0 / 16.0)
        inf_obj = EntropicBilinearObjective(kernel_matrix("x*y", s, s), math.inf, uniform(s), uniform(s))
        assert inf_obj.modulus.lam == 0.0

    def test_kernel_families(self):
        s = np.array([0.0, 1.0, 3.0])
        np.testing.assert_array_equal(kernel_matrix("|x-y|", s, s)[0], [0, 1, 3])
        np.testing.assert_array_equal(kernel_matrix("-(x-y)^2", s, s)[2], [-9, -4, 0])
        with pytest.raises(ValueError):
            kernel_matrix("cosine", s, s)

    def test_support_mismatch(self):
        s = [0.0, 1.0]
        obj = EntropicBilinearObjective(SWAP, 1.0, uniform(s), uniform(s))
        with pytest.raises(SupportMismatch):
            obj.evaluate(uniform([0.0, 2.0]), uniform(s))

    def test_ni_gap_matches_enumeration(self):
        s = np.linspace(-1, 1, 4)
        obj = EntropicBilinearObjective(kernel_matrix("x*y", s, s), math.inf, uniform(s), uniform(s))
        mu, nu = GridMeasure(s, [0.1, 0.2, 0.3, 0.4]), GridMeasure(s, [0.4, 0.3, 0.2, 0.1])
        # bilinear game: extremes over the simplex sit at vertices
        sup = max(obj.evaluate(mu, dirac(s, j)) for j in range(4))
        inf = min(obj.evaluate(dirac(s, i), nu) for i in range(4))
        assert obj.ni_gap(ProductPoint(mu, nu, "wasserstein1d")) == pytest.approx(sup - inf, abs=1e-14)

    def test_saddle_is_gibbs_fixed_point(self):
        s = np.linspace(0, 1, 6)
        rho = uniform(s)
        obj = EntropicBilinearObjective(kernel_matrix("x*y", s, s), 2.0, rho, rho)
        z = entropic_saddle(obj)
        gap = obj.ni_gap(z)
        assert gap <= 1e-11
        mu, nu = z.x.weights, z.y.weights
        gibbs_mu = rho.weights * np.exp(-obj.beta * obj.ell @ nu)
        gibbs_nu = rho.weights * np.exp(obj.beta * obj.ell.T @ mu)
        # the gap is 1/beta-strongly convex in l1 (Pinsker), so the weights are within
        # sqrt(2 beta gap) of the saddle and the Gibbs map amplifies that by 1 + beta |ell|
        bound = math.sqrt(2 * obj.beta * gap) * (1 + obj.beta * np.abs(obj.ell).max())
        np.testing.assert_allclose(mu, gibbs_mu / gibbs_mu.sum(), atol=bound)
        np.testing.assert_allclose(nu, gibbs_nu / gibbs_nu.sum(), atol=bound)


def _regularized(obj, anchor, tau, mu, nu):
    return (obj.evaluate(mu, nu) + w2_sq_1d(mu, anchor.x) / (2 * tau)
            - w2_sq_1d(nu, anchor.y) / (2 * tau))


def _sampled_saddle_violation(obj, anchor, tau, J, rng, draws=400):
    """Largest sampled improvement of either player against ``J``."""
    s_x, s_y = obj.rho_x.support, obj.rho_y.support
    value = _regularized(obj, anchor, tau, J.x, J.y)
    worst = -math.inf
    for k in range(draws):
        if k % 4 == 0:
            a = np.zeros(s_x.size)
            a[rng.integers(s_x.size)] = 1.0
            b = np.zeros(s_y.size)
            b[rng.integers(s_y.size)] = 1.0
        else:
            eps = 10.0 ** rng.uniform(-4, 0)
            a = (1 - eps) * J.x.weights + eps * rng.dirichlet(np.ones(s_x.size))
            b = (1 - eps) * J.y.weights + eps * rng.dirichlet(np.ones(s_y.size))
        mu, nu = GridMeasure(s_x, a / a.sum()), GridMeasure(s_y, b / b.sum())
        worst = max(worst, value - _regularized(obj, anchor, tau, mu, J.y),
                    _regularized(obj, anchor, tau, J.x, nu) - value)
    return worst


class TestResolvent:
    @pytest.mark.parametrize("beta", [1.0, math.inf])
    def test_sampled_saddle_of_regularized(self, beta):
        s = np.linspace(-1, 1, 6)
        obj = EntropicBilinearObjective(kernel_matrix("x*y", s, s), beta, uniform(s), uniform(s))
        w = np.exp(2 * s)
        anchor = grid_point(s, w / w.sum(), s, w[::-1] / w.sum())
        res = obj.resolvent(anchor, 0.5, 1e-12)
        assert res.gap <= 1e-10
        viol = _sampled_saddle_violation(obj, anchor, 0.5, res.point, np.random.default_rng(0))
        assert viol <= 1e-10

    def test_saddle_is_fixed(self):
        s = np.linspace(0, 1, 5)
        obj = EntropicBilinearObjective(kernel_matrix("x*y", s, s), 1.0, uniform(s), uniform(s))
        z = obj.saddle_point()
        J = obj.resolvent(z, 0.3, 1e-13).point
        assert product_distance_sq(z, J) <= 1e-16

    def test_nonpositive_tau(self):
        from gdaflow.core import NonpositiveTau
        s = [0.0, 1.0]
        obj = EntropicBilinearObjective(SWAP, 1.0, uniform(s), uniform(s))
        with pytest.raises(NonpositiveTau):
            obj.resolvent(grid_point(s, [0.5, 0.5], s, [0.5, 0.5]), 0.0, 1e-10)


class TestOneStepInequalitiesOnGrid:
    """Weight-mixing curves are the only curves on a fixed grid, and the squared
    transport distance is not 2-convex along them: random test points satisfy
    the one-step inequalities, test points hugging the resolvent need not."""

    def setup_method(self):
        xs = np.linspace(0, 1, 16)
        self.xs = xs
        self.obj = EntropicBilinearObjective(kernel_matrix("x*y", xs, xs), 1.0, uniform(xs), uniform(xs))
        w0, v0 = np.exp(-8 * xs), np.exp(8 * xs)
        self.z = grid_point(xs, w0 / w0.sum(), xs, v0 / v0.sum())
        self.tau = 0.5
        self.J = self.obj.resolvent(self.z, self.tau, 1e-12).point

    def residuals(self, pairs):
        from gdaflow.scheme import discrete_evi_residuals
        tests = [grid_point(self.xs, a / a.sum(), self.xs, b / b.sum()) for a, b in pairs]
        return discrete_evi_residuals(self.obj, self.z, self.J, self.tau, tests)

    def test_dirichlet_points_hold(self):
        rng = np.random.default_rng(1)
        pairs = [(rng.dirichlet(np.ones(16)), rng.dirichlet(np.ones(16))) for _ in range(200)]
        assert self.residuals(pairs).max() < 0

    def test_points_near_resolvent_can_violate(self):
        rng = np.random.default_rng(1)
        pairs = []
        for _ in range(200):
            eps = 10 ** rng.uniform(-6, -1)
            pairs.append(((1 - eps) * self.J.x.weights + eps * rng.dirichlet(np.ones(16)),
                          (1 - eps) * self.J.y.weights + eps * rng.dirichlet(np.ones(16))))
        r = self.residuals(pairs)
        assert r.max() > 0
        # the violations stay small in absolute terms
        assert r.max() < 1e-2
