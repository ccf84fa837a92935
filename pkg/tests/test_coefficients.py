"""
Tests for projection coefficients and the characteristic-function integral.
"""

import math

import numpy as np
import pytest

from app.services.coefficients import (
    CLOSED_MOMENTS,
    _gradient_factor,
    closed_value,
    coeff_report,
    fourth_order_patterns,
    gradient_weight,
    is_vanishing,
    moment_Ir,
    projection_coefficient,
    vanishing_patterns,
)
from app.services.integrals import (
    Z_COVARIANCE,
    Z_FORM,
    liwei_expectation,
    quadratic_form_determinant,
)
from app.services.theory import CLOSED_H25, CLOSED_K2, CLOSED_K5
from app.utils.errors import DomainError, UnsupportedPattern


class TestClosedForms:
    """Tests for the closed coefficient values."""

    def test_values(self):
        assert CLOSED_K2 == pytest.approx(math.sqrt(3.0) / (2.0 * math.pi))
        assert CLOSED_K5 == pytest.approx(-7.0 / (27.0 * math.sqrt(3.0) * math.pi))
        assert CLOSED_H25 == pytest.approx(-1.0 / (3.0 * math.sqrt(3.0) * math.pi))

    def test_identities_through_moments(self):
        """k5 and h25 agree with their expressions through I0, I2, I4."""
        residuals = coeff_report("closed").identity_residuals()
        assert abs(residuals["k5"]) < 1e-12
        assert abs(residuals["h25"]) < 1e-12

    def test_symmetric_gradient_components(self):
        assert closed_value((0, 4, 0, 0, 0)) == closed_value((4, 0, 0, 0, 0))
        assert closed_value((0, 2, 0, 0, 2)) == closed_value((2, 0, 0, 0, 2))

    def test_unknown_pattern(self):
        """Non-vanishing patterns outside the leading five have no closed value."""
        assert closed_value((2, 2, 0, 0, 0)) is None
        with pytest.raises(UnsupportedPattern):
            projection_coefficient((2, 2, 0, 0, 0), "closed")


class TestPatterns:
    """Tests for pattern enumeration and parity."""

    def test_counts(self):
        assert len(fourth_order_patterns()) == 70
        assert len(vanishing_patterns()) == 50

    def test_gradient_weight(self):
        assert gradient_weight((4, 0, 0, 0, 0)) == 3.0
        assert gradient_weight((2, 2, 0, 0, 0)) == 1.0
        assert gradient_weight((1, 1, 2, 0, 0)) == 0.0

    def test_parity(self):
        assert is_vanishing((0, 0, 0, 1, 3))
        assert is_vanishing((0, 0, 1, 0, 3)) is False
        assert is_vanishing((0, 0, 3, 0, 1)) is False
        assert is_vanishing((2, 0, 1, 0, 1)) is False
        assert is_vanishing((2, 0, 1, 1, 0))

    def test_odd_gradient_index_is_zero(self):
        assert projection_coefficient((1, 0, 1, 1, 1), "closed").value == 0.0
        assert projection_coefficient((1, 0, 1, 1, 1), "liwei").value == 0.0

    @pytest.mark.parametrize("pattern", [(4, 0, 0, 0), (1, 1, 1, 1, 1), (-1, 1, 0, 0, 4)])
    def test_rejects_bad_patterns(self, pattern):
        with pytest.raises(UnsupportedPattern):
            projection_coefficient(pattern)

    def test_rejects_unknown_method(self):
        with pytest.raises(DomainError):
            projection_coefficient((4, 0, 0, 0, 0), "simpson")


class TestCharacteristicIntegral:
    """Tests for absolute moments of quadratic forms."""

    def test_determinant(self):
        """det(I - 2 i t Sigma A) = 1 + 12 t^2 + 16 i t^3."""
        t = 0.35
        det = quadratic_form_determinant(Z_FORM, Z_COVARIANCE, t)
        assert det.real == pytest.approx(1.0 + 12.0 * t * t, abs=1e-12)
        assert det.imag == pytest.approx(16.0 * t**3, abs=1e-12)

    def test_base_moment(self):
        assert liwei_expectation(Z_FORM, Z_COVARIANCE) == pytest.approx(4.0 / math.sqrt(3.0), abs=1e-6)

    def test_chi_square(self):
        assert liwei_expectation(np.eye(3), np.eye(3)) == pytest.approx(3.0, abs=1e-6)

    def test_difference_of_squares(self):
        assert liwei_expectation(np.diag([1.0, -1.0, 0.0]), np.eye(3)) == pytest.approx(
            4.0 / math.pi, abs=1e-6
        )

    def test_weighted_moment(self):
        assert moment_Ir(2, "liwei").value == pytest.approx(CLOSED_MOMENTS[2], rel=1e-6)

    @pytest.mark.parametrize(
        "pattern,expected",
        [
            ((4, 0, 0, 0, 0), CLOSED_K2),
            ((0, 0, 0, 0, 4), CLOSED_K5),
            ((0, 2, 0, 0, 2), CLOSED_H25),
        ],
    )
    def test_projection_coefficients(self, pattern, expected):
        assert projection_coefficient(pattern, "liwei").value == pytest.approx(expected, abs=1e-6)

    def test_vanishing_pattern(self):
        assert abs(projection_coefficient((0, 0, 0, 1, 3), "liwei").value) < 1e-8


class TestMonteCarlo:
    """Seeded Monte Carlo estimates."""

    def test_k2_within_error(self):
        est = projection_coefficient((4, 0, 0, 0, 0), "montecarlo", n_samples=200_000, seed=5)
        assert abs(est.value - CLOSED_K2) <= 4.0 * est.stderr
        assert est.n_samples == 200_000

    def test_vanishing_pattern_near_zero(self):
        est = projection_coefficient((0, 0, 0, 1, 3), "montecarlo", n_samples=200_000, seed=6)
        assert abs(est.value) <= 4.0 * est.stderr

    def test_odd_gradient_index_is_sampled(self):
        """H3(Y3) H1(Y1) is estimated with a non-zero standard error."""
        est = projection_coefficient((1, 0, 3, 0, 0), "montecarlo", n_samples=200_000, seed=8)
        assert est.n_samples == 200_000
        assert est.stderr > 0.0
        assert abs(est.value) <= 4.0 * est.stderr

    @pytest.mark.parametrize("q", [0, 1, 2, 3, 4])
    def test_gradient_factor_mean(self, q):
        """The sampled gradient factor averages to H_q(0)."""
        y = np.random.default_rng(q).standard_normal(400_000)
        values = _gradient_factor(q, y)
        stderr = values.std() / math.sqrt(y.size)
        assert abs(values.mean() - gradient_weight((q, 0, 4 - q, 0, 0))) <= 4.0 * stderr + 1e-12

    def test_gradient_components_share_the_estimate(self):
        """Swapping the two gradient indices leaves the seeded estimate unchanged."""
        first = projection_coefficient((4, 0, 0, 0, 0), "montecarlo", n_samples=50_000, seed=9)
        second = projection_coefficient((0, 4, 0, 0, 0), "montecarlo", n_samples=50_000, seed=9)
        assert first.value == second.value

    def test_base_moment(self):
        est = moment_Ir(0, "montecarlo", n_samples=200_000, seed=7)
        assert abs(est.value - CLOSED_MOMENTS[0]) <= 4.0 * est.stderr

    def test_deterministic(self):
        first = moment_Ir(2, "montecarlo", n_samples=60_000, seed=3)
        second = moment_Ir(2, "montecarlo", n_samples=60_000, seed=3)
        assert first.value == second.value

    def test_no_closed_odd_moment(self):
        with pytest.raises(DomainError):
            moment_Ir(1, "closed")
