"""
Tests for Kac-Rice densities and closed-form predictions.
"""

import math

import pytest

from app.schemas.field import Interval
from app.services.theory import (
    PROXY_DENOMINATOR,
    crit_interval_fluctuation_leading,
    density_p3c,
    density_pi1c,
    expected_crit_in_interval,
    expected_lkc,
    integrate_density,
    lkc_fluctuation_leading,
    nu_c,
    predicted_moments,
    trispectrum_proxy,
)
from app.utils.errors import DomainError


class TestDensities:
    """Tests for the critical-value densities."""

    def test_pi1c_at_zero(self):
        assert float(density_pi1c(0.0)) == pytest.approx(math.sqrt(3.0) / math.sqrt(8.0 * math.pi))

    def test_pi1c_is_a_probability_density(self):
        assert integrate_density(density_pi1c, Interval()) == pytest.approx(1.0, abs=1e-9)

    def test_pi1c_is_even(self):
        assert integrate_density(density_pi1c, Interval(lo=0.0)) == pytest.approx(0.5, abs=1e-9)

    def test_p3c_integrates_to_zero(self):
        assert abs(integrate_density(density_p3c, Interval())) < 1e-9
        assert abs(integrate_density(density_p3c, Interval(lo=0.0))) < 1e-9

    def test_p3c_at_zero(self):
        assert float(density_p3c(0.0)) == pytest.approx(1.0 / math.sqrt(8.0 * math.pi))

    def test_nu_c(self):
        """Nonzero on a half-line, zero over the whole line."""
        assert nu_c(Interval(lo=1.0)) > 0.0
        assert nu_c(Interval()) < 1e-15

    def test_bounded_interval(self):
        """Integrals over adjacent intervals add up."""
        left = integrate_density(density_pi1c, Interval(hi=0.5))
        right = integrate_density(density_pi1c, Interval(lo=0.5))
        assert left + right == pytest.approx(1.0, abs=1e-9)


class TestPredictedMoments:
    """Tests for leading-order moments."""

    def test_mean_count(self):
        assert predicted_moments(10).mean_crit == pytest.approx(220.0 / math.sqrt(3.0))

    def test_shared_leading_variance(self):
        stats = predicted_moments(100)
        assert stats.var_crit_leading == pytest.approx(172.8, rel=1e-3)
        assert stats.var_A_leading == stats.var_crit_leading
        assert stats.cov_crit_A_leading == stats.var_crit_leading

    def test_h4_variance(self):
        assert predicted_moments(50).var_h4_leading == pytest.approx(576.0 * math.log(50) / 2500.0)

    def test_rejects_degree_one(self):
        with pytest.raises(DomainError):
            predicted_moments(1)


class TestTrispectrumProxy:
    """Tests for A_ell."""

    def test_scaling(self):
        assert trispectrum_proxy(1.0, 100) == pytest.approx(-25.78, abs=0.01)

    def test_linear_in_h4(self):
        assert trispectrum_proxy(-2.0, 30) == pytest.approx(2.0 * 930.0 / PROXY_DENOMINATOR)

    def test_standardized(self):
        """The standardized proxy divides by the leading standard deviation."""
        raw = trispectrum_proxy(0.3, 40)
        sd = math.sqrt(predicted_moments(40).var_A_leading)
        assert trispectrum_proxy(0.3, 40, standardized=True) == pytest.approx(raw / sd)


class TestExpectations:
    """Tests for expected counts and excursion functionals."""

    def test_whole_line_count(self):
        """E[N^c(R)] = (2/sqrt 3) lam."""
        assert expected_crit_in_interval(Interval(), 20) == pytest.approx(
            2.0 / math.sqrt(3.0) * 420.0, rel=1e-9
        )

    def test_lkc_at_zero(self):
        lkc = expected_lkc(0.0, 10)
        assert lkc.level_length == pytest.approx(math.pi * math.sqrt(220.0))
        assert lkc.boundary_length == pytest.approx(0.5 * lkc.level_length)
        assert lkc.area == pytest.approx(2.0 * math.pi)
        assert lkc.euler == pytest.approx(1.0)

    def test_lkc_far_threshold(self):
        lkc = expected_lkc(-20.0, 10)
        assert lkc.area == pytest.approx(4.0 * math.pi)
        assert lkc.euler == pytest.approx(2.0)

    def test_fluctuations_vanish_at_zero(self):
        """The second-chaos components vanish at u = 0."""
        fluct = lkc_fluctuation_leading(0.0, 10, h2=1.5)
        assert fluct.area == 0.0
        assert fluct.boundary_length == 0.0
        assert fluct.euler == 0.0

    def test_whole_line_fluctuation_vanishes(self):
        assert abs(crit_interval_fluctuation_leading(Interval(), 30, h2=2.0)) < 1e-6
