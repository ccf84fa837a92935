"""
Theory service layer.
Kac-Rice densities, leading-order moments, the trispectrum proxy and the
expected values and fluctuations of excursion-set functionals.
"""

import math
from typing import Callable

import numpy as np
from scipy import integrate, stats

from app.schemas.field import Interval
from app.schemas.theory import (
    LipschitzKilling,
    LipschitzKillingFluctuation,
    PredictedStats,
)
from app.utils.errors import DomainError, QuadratureError
from app.utils.logging_config import get_logger

logger = get_logger(__name__)

SQRT3 = math.sqrt(3.0)
# A_ell = -lam / (72 sqrt(3) pi) h_{ell;4}
PROXY_DENOMINATOR = 72.0 * SQRT3 * math.pi
# Leading projection coefficients of the critical point count
CLOSED_K2 = SQRT3 / (2.0 * math.pi)
CLOSED_K5 = -7.0 / (27.0 * SQRT3 * math.pi)
CLOSED_H25 = -1.0 / (3.0 * SQRT3 * math.pi)


def density_pi1c(t):
    """Density of critical values: (sqrt 3 / sqrt(8 pi)) (2 e^{-t^2} + t^2 - 1) e^{-t^2/2}."""
    t = np.asarray(t, dtype=float)
    return SQRT3 / math.sqrt(8.0 * math.pi) * (2.0 * np.exp(-t * t) + t * t - 1.0) * np.exp(
        -0.5 * t * t
    )


def density_p3c(t):
    """
    Second-chaos weight of critical values:
    (1/sqrt(8 pi)) e^{-3t^2/2} [2 - 6t^2 - e^{t^2}(1 - 4t^2 + t^4)].
    """
    t = np.asarray(t, dtype=float)
    t2 = t * t
    return (
        np.exp(-1.5 * t2) * (2.0 - 6.0 * t2)
        - np.exp(-0.5 * t2) * (1.0 - 4.0 * t2 + t2 * t2)
    ) / math.sqrt(8.0 * math.pi)


def integrate_density(
    density: Callable, interval: Interval, tol: float = 1e-11
) -> float:
    """Integral of a density over an interval (unbounded ends allowed)."""
    lo, hi = interval.lower, interval.upper
    # split at 0 so both halves of symmetric integrands are resolved
    pieces = []
    if lo < 0.0 < hi:
        pieces = [(lo, 0.0), (0.0, hi)]
    else:
        pieces = [(lo, hi)]
    total = 0.0
    for a, b in pieces:
        value, err = integrate.quad(
            lambda x: float(density(x)), a, b, epsabs=tol, epsrel=tol, limit=200
        )
        if err > 1e3 * tol:
            raise QuadratureError(f"density integral over [{a}, {b}]", achieved=err)
        total += value
    return total


def nu_c(interval: Interval) -> float:
    """[int_I p3c]^2; nonzero exactly for nondegenerate intervals."""
    return integrate_density(density_p3c, interval) ** 2


def _lam(ell: int) -> float:
    return float(ell * (ell + 1))


def predicted_moments(ell: int) -> PredictedStats:
    """
    Leading-order moments.

    Var(N^c), Var(A_ell) and Cov(N^c, A_ell) share the leading term
    ell^2 log ell / (27 pi^2).

    Raises:
        DomainError: If ell < 2
    """
    if ell < 2:
        raise DomainError(f"predictions need ell >= 2, got {ell}")
    lam = _lam(ell)
    leading = ell**2 * math.log(ell) / (27.0 * math.pi**2)
    return PredictedStats(
        ell=ell,
        mean_crit=2.0 / SQRT3 * lam,
        var_crit_leading=leading,
        var_h4_leading=576.0 * math.log(ell) / ell**2,
        var_A_leading=leading,
        cov_crit_A_leading=leading,
        scale_A=-lam / PROXY_DENOMINATOR,
    )


def trispectrum_proxy(h4: float, ell: int, standardized: bool = False) -> float:
    """A_ell = -lam / (72 sqrt(3) pi) h_{ell;4}, optionally divided by its leading sd."""
    value = -_lam(ell) / PROXY_DENOMINATOR * h4
    if standardized:
        value /= math.sqrt(predicted_moments(ell).var_A_leading)
    return value


def expected_crit_in_interval(interval: Interval, ell: int) -> float:
    """(2/sqrt 3) lam int_I pi1c."""
    return 2.0 / SQRT3 * _lam(ell) * integrate_density(density_pi1c, interval)


def crit_interval_fluctuation_leading(interval: Interval, ell: int, h2: float) -> float:
    """ell^{3/2} int_I p3c times the standardized h_{ell;2}."""
    var_h2 = (4.0 * math.pi) ** 2 * 2.0 / (2 * ell + 1)
    return ell**1.5 * integrate_density(density_p3c, interval) * h2 / math.sqrt(var_h2)


def expected_lkc(u: float, ell: int) -> LipschitzKilling:
    """
    Expected Euler characteristic, boundary length and area of {f >= u}.

    E[area] = 4 pi (1 - Phi(u)), E[level length] = 4 pi phi(u) sqrt(lam/2)
    sqrt(pi/2), E[chi] = 2 (1 - Phi(u)) + lam u phi(u).
    """
    lam = _lam(ell)
    tail = float(stats.norm.sf(u))
    dens = float(stats.norm.pdf(u))
    length = 4.0 * math.pi * dens * math.sqrt(lam / 2.0) * math.sqrt(math.pi / 2.0)
    return LipschitzKilling(
        u=u,
        euler=2.0 * tail + lam * u * dens,
        boundary_length=0.5 * length,
        level_length=length,
        area=4.0 * math.pi * tail,
    )


def lkc_fluctuation_leading(u: float, ell: int, h2: float) -> LipschitzKillingFluctuation:
    """Leading h_{ell;2} components of the three functionals at u != 0."""
    lam = _lam(ell)
    dens = float(stats.norm.pdf(u))
    return LipschitzKillingFluctuation(
        u=u,
        euler=0.5 * (lam / 2.0) * (u**3 - u) * dens * h2 / (2.0 * math.pi),
        boundary_length=0.5 * math.sqrt(lam / 2.0) * math.sqrt(math.pi / 8.0) * u * u * dens * h2,
        area=0.5 * u * dens * h2,
    )


def nodal_length_fluctuation_leading(ell: int, h4: float) -> float:
    """Leading part of L1(0) - E[L1(0)]: -(1/4) sqrt(lam/2) h4 / 4!."""
    return -0.25 * math.sqrt(_lam(ell) / 2.0) * h4 / 24.0


def nodal_variance_leading(ell: int) -> float:
    """Var(L1(0)) ~ log(ell) / 128 for half the nodal length."""
    return math.log(ell) / 128.0
