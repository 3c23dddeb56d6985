"""
Tests for the forward model: joint CDFs of (U, V) in every regime, sampling and the bivariate CDF object
"""

import math

import numpy as np
import pytest

from src.maxident.distributions.univariate import cdf_eval, quantile
from src.maxident.exceptions import ConfigurationError, DomainError
from src.maxident.max_model.joint import (
    JointCdf2D,
    joint_cdf,
    joint_cdf_kotlarski,
    joint_cdf_maxind,
    joint_cdf_mixed,
    joint_cdf_positive,
    marginal_u,
    marginal_v,
    sample_joint,
    sample_kotlarski,
)
from src.maxident.models.specs import Dependence, DependenceMode, GeneratorFamily, GeneratorSpec
from src.maxident.testing.scenarios import (
    exponential,
    exponential_system,
    fgm_system,
    mixed,
    point_mass_system,
    positive,
    weibull_system,
)


@pytest.fixture
def unit_coeffs():
    return positive(1, 1, 1, 1)


class TestPositiveRegime:
    def test_diagonal_closed_form(self, unit_coeffs):
        t = np.linspace(0.05, 6.0, 50)
        g = joint_cdf_positive(exponential_system(), unit_coeffs, t, t)
        assert np.max(np.abs(g - (1.0 - np.exp(-t)) ** 4)) <= 1e-12

    def test_product_formula(self):
        system = weibull_system()
        coeffs = positive(1, 3, 2, 1)
        t1, t2 = 0.7, 1.9
        expected = (
            cdf_eval(system.fx, t1) * cdf_eval(system.fy, t2)
            * cdf_eval(system.fz1, min(t1 / 1, t2 / 2)) * cdf_eval(system.fz1, min(t1 / 3, t2 / 1))
        )
        assert joint_cdf_positive(system, coeffs, t1, t2) == pytest.approx(expected, abs=1e-14)

    def test_marginals_and_upper_corner(self):
        system = exponential_system()
        coeffs = positive(1, 3, 2, 1)
        t = 1.3
        expected_u = (1 - math.exp(-t)) * (1 - math.exp(-t)) * (1 - math.exp(-t / 3))
        assert marginal_u(system, coeffs, t) == pytest.approx(expected_u, abs=1e-14)
        expected_v = (1 - math.exp(-t)) * (1 - math.exp(-t / 2)) * (1 - math.exp(-t))
        assert marginal_v(system, coeffs, t) == pytest.approx(expected_v, abs=1e-14)
        assert joint_cdf(system, coeffs, math.inf, math.inf) == 1.0

    def test_regime_mismatch(self):
        with pytest.raises(ConfigurationError):
            joint_cdf_positive(exponential_system(), mixed(1, -1, 1, -1), 1.0, 1.0)

    def test_max_independent_system_rejected(self, unit_coeffs):
        with pytest.raises(ConfigurationError):
            joint_cdf_positive(fgm_system(), unit_coeffs, 1.0, 1.0)


class TestMixedRegime:
    def test_exponential_closed_form(self):
        coeffs = mixed(1, -1, 1, -1)
        t1 = np.array([0.3, 1.0, 2.5])
        t2 = np.array([0.8, 0.4, 2.5])
        expected = (1 - np.exp(-t1)) * (1 - np.exp(-t2)) * (1 - np.exp(-np.minimum(t1, t2)))
        assert np.allclose(joint_cdf_mixed(exponential_system(), coeffs, t1, t2), expected, atol=1e-14, rtol=0)

    def test_negative_arguments(self):
        assert joint_cdf_mixed(exponential_system(), mixed(1, -1, 1, -1), -0.5, 1.0) == 0.0

    def test_point_mass_components(self):
        # Z2 >= -2 holds surely, so only X, Y and Z1 bind at (1, 1)
        system = point_mass_system(1.0)
        coeffs = mixed(1, -0.5, 1, -0.5)
        assert joint_cdf_mixed(system, coeffs, 1.0, 1.0) == 1.0

    def test_dispatch(self):
        coeffs = mixed(1, -1, 1, -1)
        assert joint_cdf(exponential_system(), coeffs, 1.0, 2.0) == joint_cdf_mixed(exponential_system(), coeffs, 1.0, 2.0)


class TestMaxIndependent:
    def test_constant_generator_matches_independent(self):
        coeffs = positive(1, 3, 2, 1)
        gen = GeneratorSpec(family=GeneratorFamily.CONSTANT_ONE)
        system = exponential_system().with_components(
            dependence=Dependence(mode=DependenceMode.MAX_INDEPENDENT, generator=gen)
        )
        t1 = np.linspace(0.1, 4.0, 7)
        t2 = np.linspace(0.2, 3.0, 7)
        assert np.array_equal(joint_cdf_maxind(system, coeffs, t1, t2), joint_cdf_positive(exponential_system(), coeffs, t1, t2))

    def test_fgm_factor(self):
        coeffs = positive(1, 3, 2, 1)
        t1, t2 = 0.5, 0.7
        m1, m2 = min(t1, t2 / 2), min(t1 / 3, t2)
        tails = math.exp(-t1) * math.exp(-t2) * math.exp(-m1) * math.exp(-m2)
        base = joint_cdf_positive(exponential_system(), coeffs, t1, t2)
        assert joint_cdf(fgm_system(-0.5), coeffs, t1, t2) == pytest.approx(base * (1 - 0.5 * tails), abs=1e-14)

    def test_mixed_regime_rejected(self):
        with pytest.raises(ConfigurationError):
            joint_cdf_maxind(fgm_system(), mixed(1, -1, 1, -1), 1.0, 1.0)


REGIMES = {
    "positive": (weibull_system(), positive(1, 3, 2, 1)),
    "mixed": (exponential_system(), mixed(1, -1, 1, -2)),
    "maxind": (fgm_system(-0.5), positive(1, 3, 2, 1)),
}


class TestCdfProperties:
    @pytest.mark.parametrize("regime", sorted(REGIMES))
    def test_monotone_in_each_argument(self, regime):
        system, coeffs = REGIMES[regime]
        rng = np.random.default_rng(17)
        t1, t2 = rng.uniform(-1.0, 6.0, (2, 20000))
        d1, d2 = rng.exponential(0.5, (2, 20000))
        step = joint_cdf(system, coeffs, t1 + d1, t2 + d2) - joint_cdf(system, coeffs, t1, t2)
        assert step.min() >= -1e-15

    @pytest.mark.parametrize("regime", sorted(REGIMES))
    def test_rectangle_mass_is_nonnegative(self, regime):
        system, coeffs = REGIMES[regime]
        rng = np.random.default_rng(29)
        x = np.sort(rng.uniform(-1.0, 6.0, (20000, 2)), axis=1)
        y = np.sort(rng.uniform(-1.0, 6.0, (20000, 2)), axis=1)
        x1, x2, y1, y2 = x[:, 0], x[:, 1], y[:, 0], y[:, 1]

        def g(s, t):
            return joint_cdf(system, coeffs, s, t)

        mass = g(x2, y2) - g(x1, y2) - g(x2, y1) + g(x1, y1)
        assert mass.min() >= -1e-12

    def test_positive_factorization_on_random_points(self):
        system, coeffs = REGIMES["positive"]
        rng = np.random.default_rng(31)
        t1, t2 = rng.uniform(0.0, 6.0, (2, 5000))
        expected = (
            cdf_eval(system.fx, t1) * cdf_eval(system.fy, t2)
            * cdf_eval(system.fz1, np.minimum(t1 / 1, t2 / 2)) * cdf_eval(system.fz1, np.minimum(t1 / 3, t2 / 1))
        )
        assert np.max(np.abs(joint_cdf(system, coeffs, t1, t2) - expected)) <= 1e-14

    @pytest.mark.parametrize("regime", sorted(REGIMES))
    def test_values_are_probabilities(self, regime):
        system, coeffs = REGIMES[regime]
        t1, t2 = np.random.default_rng(37).uniform(-1.0, 6.0, (2, 5000))
        values = joint_cdf(system, coeffs, t1, t2)
        assert values.min() >= 0.0 and values.max() <= 1.0


class TestSampling:
    def test_point_mass_rows(self):
        pairs = sample_joint(point_mass_system(1.0), positive(1, 1, 1, 1), 10, seed=1)
        assert pairs.shape == (10, 2)
        assert np.all(pairs == 1.0)

    def test_deterministic(self):
        coeffs = positive(1, 3, 2, 1)
        assert np.array_equal(sample_joint(weibull_system(), coeffs, 500, 4), sample_joint(weibull_system(), coeffs, 500, 4))

    def test_invalid_size(self):
        with pytest.raises(DomainError):
            sample_joint(exponential_system(), positive(1, 1, 1, 1), 0, seed=1)

    def test_empirical_agrees_with_analytic(self, unit_coeffs):
        system = exponential_system()
        pairs = sample_joint(system, unit_coeffs, 200000, seed=5)
        empirical = JointCdf2D.from_samples(pairs)
        nodes = quantile(system.fz1, np.linspace(0.05, 0.95, 10))
        t1, t2 = nodes[:, None], nodes[None, :]
        gap = np.abs(empirical.evaluate(t1, t2) - joint_cdf(system, unit_coeffs, t1, t2))
        assert gap.max() <= 0.012

    def test_mixed_sample_agrees_with_analytic(self):
        system = exponential_system()
        coeffs = mixed(1, -1, 2, -0.5)
        pairs = sample_joint(system, coeffs, 100000, seed=8)
        empirical = JointCdf2D.from_samples(pairs)
        nodes = np.array([0.3, 0.8, 1.5, 3.0])
        t1, t2 = nodes[:, None], nodes[None, :]
        gap = np.abs(empirical.evaluate(t1, t2) - joint_cdf(system, coeffs, t1, t2))
        assert gap.max() <= 0.012

    def test_kotlarski_sampler(self):
        f0, f1, f2 = exponential(1.0), exponential(2.0), exponential(0.5)
        pairs = sample_kotlarski(f0, f1, f2, 100000, seed=2)
        empirical = JointCdf2D.from_samples(pairs)
        nodes = np.array([0.5, 1.0, 2.0])
        t1, t2 = nodes[:, None], nodes[None, :]
        assert np.abs(empirical(t1, t2) - joint_cdf_kotlarski(f0, f1, f2, t1, t2)).max() <= 0.012


class TestJointCdfObject:
    def test_from_system_marginals(self):
        coeffs = positive(1, 3, 2, 1)
        g = JointCdf2D.from_system(weibull_system(), coeffs)
        assert g.marginal_u(1.2) == pytest.approx(marginal_u(weibull_system(), coeffs, 1.2), abs=1e-14)
        assert g.marginal_v(0.4) == pytest.approx(marginal_v(weibull_system(), coeffs, 0.4), abs=1e-14)
        assert g.lower == 0.0 and g.upper == math.inf

    def test_empirical_counts(self):
        g = JointCdf2D.from_samples([[1.0, 2.0], [2.0, 1.0], [3.0, 3.0]])
        assert g(2.0, 2.0) == pytest.approx(2.0 / 3.0)
        assert g(1.0, 1.0) == 0.0
        assert g.marginal_u(1.0) == pytest.approx(1.0 / 3.0)
        assert g(math.inf, math.inf) == 1.0

    def test_empirical_rejects_bad_input(self):
        with pytest.raises(DomainError):
            JointCdf2D.from_samples(np.zeros((0, 2)))
        with pytest.raises(DomainError):
            JointCdf2D.from_samples([[1.0, math.nan]])

    def test_table_reproduces_nodes(self):
        coeffs = positive(1, 1, 1, 1)
        g = JointCdf2D.from_system(exponential_system(), coeffs)
        nodes = [0.5, 1.0, 2.0]
        table = g.to_table(nodes, nodes)
        rebuilt = JointCdf2D.from_table(table["t1"], table["t2"], table["values"])
        assert rebuilt(1.0, 2.0) == pytest.approx(g(1.0, 2.0), abs=1e-14)

    def test_bounded_range(self):
        g = JointCdf2D.from_system(exponential_system(), positive(1, 1, 1, 1))
        lower, upper = g.bounded_range()
        assert lower == 0.0 and math.isfinite(upper)
