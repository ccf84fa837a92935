"""
Tests for Legendre polynomials, associated functions and quadrature rules.
"""

import math

import numpy as np
import pytest

from app.services.legendre import (
    assoc_legendre_norm,
    assoc_legendre_table,
    assoc_legendre_theta_derivs,
    gauss_legendre,
    hilb_approx,
    legendre_eval,
    legendre_values,
)
from app.utils.errors import DomainError


class TestLegendreEval:
    """Tests for P_ell and its derivatives."""

    def test_degree_two_closed_form(self):
        """P_2 = (3x^2 - 1)/2 with derivatives 3x and 3."""
        t = legendre_eval(2, 0.5)
        assert t.p == pytest.approx(-0.125)
        assert t.dp == pytest.approx(1.5)
        assert t.ddp == pytest.approx(3.0)

    def test_endpoint_closed_forms(self):
        """P'(1) = ell(ell+1)/2 and P''(1) = (ell-1)ell(ell+1)(ell+2)/8."""
        t = legendre_eval(5, 1.0)
        assert t.p == 1.0
        assert t.dp == 15.0
        assert t.ddp == 105.0

    def test_endpoint_parity(self):
        """Values at -1 follow the parity of the degree."""
        t = legendre_eval(6, -1.0)
        assert t.p == 1.0
        assert t.dp == -21.0

    def test_recurrence_matches_endpoint_forms(self):
        """The vectorized recurrence reproduces the closed endpoint values."""
        for ell in (3, 8, 40):
            p, dp, ddp = legendre_values(ell, np.array([1.0, -1.0]))
            for i, x in enumerate((1.0, -1.0)):
                exact = legendre_eval(ell, x)
                assert p[i] == pytest.approx(exact.p, rel=1e-12)
                assert dp[i] == pytest.approx(exact.dp, rel=1e-12)
                assert ddp[i] == pytest.approx(exact.ddp, rel=1e-10)

    def test_derivative_matches_finite_difference(self):
        """P' agrees with a central difference."""
        x, eps = 0.37, 1e-6
        plus = legendre_eval(20, x + eps).p
        minus = legendre_eval(20, x - eps).p
        assert legendre_eval(20, x).dp == pytest.approx((plus - minus) / (2 * eps), rel=1e-6)

    def test_out_of_range_argument(self):
        """|x| > 1 is rejected."""
        with pytest.raises(DomainError):
            legendre_values(3, np.array([1.5]))


class TestAssociatedLegendre:
    """Tests for the normalized associated Legendre table."""

    def test_order_zero_is_scaled_legendre(self):
        """p_ell0 = sqrt((2 ell + 1)/(4 pi)) P_ell."""
        expected = math.sqrt(15.0 / (4.0 * math.pi)) * legendre_eval(7, 0.3).p
        assert assoc_legendre_norm(7, 0, 0.3) == pytest.approx(expected, rel=1e-12)

    def test_normalization_every_order(self):
        """2 pi int p_ellm^2 dx = 1 for every order."""
        ell = 40
        rule = gauss_legendre(ell + 1)
        table, _ = assoc_legendre_table(ell, rule.nodes)
        norms = 2.0 * math.pi * (table**2) @ rule.weights
        np.testing.assert_allclose(norms, 1.0, rtol=1e-10)

    def test_high_degree_is_finite(self):
        """No overflow or NaN at degree 3000 near the poles."""
        table, prev = assoc_legendre_table(3000, np.array([0.999999, 0.1, -0.5]))
        assert np.all(np.isfinite(table))
        assert np.all(np.isfinite(prev))

    def test_invalid_order(self):
        """m > ell is rejected."""
        with pytest.raises(DomainError):
            assoc_legendre_norm(3, 4, 0.2)

    def test_theta_derivative_matches_finite_difference(self):
        """The first theta-derivative agrees with a central difference."""
        ell, theta, eps = 9, 1.1, 1e-6
        value, d1, _ = assoc_legendre_theta_derivs(ell, np.array([theta]))
        plus, _, _ = assoc_legendre_theta_derivs(ell, np.array([theta + eps]))
        minus, _, _ = assoc_legendre_theta_derivs(ell, np.array([theta - eps]))
        np.testing.assert_allclose(d1[:, 0], (plus - minus)[:, 0] / (2 * eps), atol=1e-6)

    def test_theta_derivs_reject_poles(self):
        """Derivatives are undefined at theta = 0."""
        with pytest.raises(DomainError):
            assoc_legendre_theta_derivs(4, np.array([0.0]))


class TestHilbApprox:
    """Tests for the high-degree oscillatory approximation."""

    @pytest.mark.parametrize("r", [0, 1, 2])
    def test_within_envelope(self, r):
        """The exact derivative lies inside the reported envelope."""
        ell, phi = 1000, 0.7
        approx, envelope = hilb_approx(ell, r, phi)
        exact = legendre_values(ell, np.array([math.cos(phi)]))[r][0]
        assert abs(exact - approx) <= envelope

    def test_rejects_angles_below_range(self):
        """phi below C/ell is outside the asymptotic range."""
        with pytest.raises(DomainError):
            hilb_approx(100, 0, 1e-4)

    def test_rejects_angles_above_half_pi(self):
        with pytest.raises(DomainError):
            hilb_approx(100, 0, math.pi / 2.0 + 1e-3)

    def test_accepts_half_pi(self):
        approx, envelope = hilb_approx(100, 2, math.pi / 2.0)
        assert math.isfinite(approx) and envelope > 0.0

    def test_amplitude_uses_half_integer_degree(self):
        """The r = 1 amplitude scales with (ell + 1/2)^{1/2}, not ell^{3/2}."""
        phi = 0.9
        nu = 100.5
        approx, _ = hilb_approx(100, 1, phi)
        psi = nu * phi + math.pi / 4.0
        expected = -math.sqrt(2.0 / math.pi) * math.sqrt(nu) / math.sin(phi) ** 1.5 * math.cos(psi)
        assert approx == pytest.approx(expected, rel=1e-12)

    def test_rejects_order(self):
        """Only r = 0, 1, 2 are tabulated."""
        with pytest.raises(DomainError):
            hilb_approx(100, 3, 0.5)


class TestGaussLegendre:
    """Tests for Gauss-Legendre rules."""

    def test_weights_sum_to_two(self):
        """Weights integrate the constant exactly."""
        assert gauss_legendre(17).weights.sum() == pytest.approx(2.0, abs=1e-14)

    def test_exact_to_degree(self):
        """An n-point rule integrates x^{2n-2} exactly."""
        rule = gauss_legendre(6)
        assert rule.integrate(rule.nodes**10) == pytest.approx(2.0 / 11.0, rel=1e-13)

    def test_scaled_rule(self):
        """The affine copy integrates on [0, 1]."""
        rule = gauss_legendre(4).scaled(0.0, 1.0)
        assert rule.integrate(rule.nodes**3) == pytest.approx(0.25, rel=1e-13)

    def test_rejects_empty_rule(self):
        with pytest.raises(DomainError):
            gauss_legendre(0)
