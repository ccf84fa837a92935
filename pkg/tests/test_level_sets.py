"""
Tests for level-curve lengths and excursion areas.
"""

import math

import numpy as np
import pytest

from app.services.level_sets import excursion_area, level_length
from app.services.polyspectra import build_grid
from app.services.sphere_field import field_from_coeffs, sample_field
from app.services.theory import expected_lkc
from app.utils.errors import DomainError


class TestLevelLength:
    """Tests for marching-squares level lengths."""

    def test_degree_one_nodal_line_is_a_great_circle(self):
        """A degree-1 field vanishes on a great circle of length 2 pi."""
        field = field_from_coeffs(1, np.array([0.3, 1.0, 0.5]))
        assert level_length(field, 0.0, resolution_factor=64) == pytest.approx(
            2.0 * math.pi, rel=1e-2
        )

    def test_resolution_doubling(self, field_l10):
        coarse = level_length(field_l10, 0.0, resolution_factor=32)
        fine = level_length(field_l10, 0.0, resolution_factor=64)
        assert coarse == pytest.approx(fine, rel=5e-3)

    def test_above_the_maximum(self, field_l10):
        assert level_length(field_l10, 50.0) == 0.0

    def test_resolution_floor(self, field_l10):
        with pytest.raises(DomainError):
            level_length(field_l10, 0.0, resolution_factor=4)

    @pytest.mark.slow
    def test_mean_nodal_length(self):
        """Mean nodal length at ell=10 is within 3% of pi sqrt(2 lam)."""
        lengths = [level_length(sample_field(10, s), 0.0) for s in range(500)]
        assert np.mean(lengths) == pytest.approx(expected_lkc(0.0, 10).level_length, rel=0.02)


class TestExcursionArea:
    """Tests for excursion areas."""

    def test_limits(self, field_l10):
        grid = build_grid(10, 8)
        assert excursion_area(field_l10, -50.0, grid) == pytest.approx(4.0 * math.pi)
        assert excursion_area(field_l10, 50.0, grid) == 0.0

    def test_monotone_in_threshold(self, field_l10):
        grid = build_grid(10, 8)
        areas = [excursion_area(field_l10, u, grid) for u in (-1.0, 0.0, 1.0)]
        assert areas[0] >= areas[1] >= areas[2]
