"""
Coefficient service layer.
Fourth-order Hermite projection coefficients of the critical point count and
the moments I_r they reduce to, in closed form, by Monte Carlo and through
the characteristic-function integral.
"""

import itertools
import math
from typing import List, Optional, Tuple

import numpy as np
from numpy.polynomial import hermite_e

from app.config import settings
from app.schemas.theory import CoeffReport, CoefficientEstimate, MomentEstimate
from app.services.integrals import (
    Y_FORM,
    Z_COVARIANCE,
    Z_FORM,
    gaussian_abs_moment,
    poly_constant,
    poly_hermite,
    poly_linear,
    poly_mul,
    poly_power,
)
from app.services.rng import stream
from app.services.theory import CLOSED_H25, CLOSED_K2, CLOSED_K5
from app.utils.errors import DomainError, UnsupportedPattern
from app.utils.logging_config import get_logger

logger = get_logger(__name__)

SQRT3 = math.sqrt(3.0)
CLOSED_MOMENTS = {0: 4.0 / SQRT3, 2: 160.0 / SQRT3, 4: 44800.0 / (3.0 * SQRT3)}

Pattern = Tuple[int, int, int, int, int]

_CLOSED_PATTERNS = {
    (4, 0, 0, 0, 0): CLOSED_K2,
    (0, 4, 0, 0, 0): CLOSED_K2,
    (0, 0, 0, 0, 4): CLOSED_K5,
    (2, 0, 0, 0, 2): CLOSED_H25,
    (0, 2, 0, 0, 2): CLOSED_H25,
}

METHODS = ("closed", "montecarlo", "liwei")


def _hermite_at(q: int, x):
    unit = np.zeros(q + 1)
    unit[q] = 1.0
    return hermite_e.hermeval(x, unit)


def _check_pattern(pattern) -> Pattern:
    pattern = tuple(int(q) for q in pattern)
    if len(pattern) != 5 or any(q < 0 for q in pattern):
        raise UnsupportedPattern(f"pattern must be five non-negative indices, got {pattern}")
    if sum(pattern) != 4:
        raise UnsupportedPattern(f"pattern {pattern} is not of total order 4")
    return pattern


def gradient_weight(pattern: Pattern) -> float:
    """H_{q1}(0) H_{q2}(0): the gradient enters only through the Dirac mass at 0."""
    return float(_hermite_at(pattern[0], 0.0) * _hermite_at(pattern[1], 0.0))


def is_vanishing(pattern: Pattern) -> bool:
    """Patterns whose coefficient is zero by parity of the Hessian law."""
    pattern = _check_pattern(pattern)
    return (
        gradient_weight(pattern) == 0.0
        or pattern[3] % 2 == 1
        or (pattern[2] + pattern[4]) % 2 == 1
    )


def fourth_order_patterns() -> List[Pattern]:
    return [
        p for p in itertools.product(range(5), repeat=5) if sum(p) == 4
    ]


def vanishing_patterns() -> List[Pattern]:
    return [p for p in fourth_order_patterns() if is_vanishing(p)]


def _chunks(n_samples: int):
    chunk = max(1, settings.HC_MC_CHUNK)
    key = 0
    remaining = n_samples
    while remaining > 0:
        size = min(chunk, remaining)
        yield key, size
        key += 1
        remaining -= size


def _mc_mean(sampler, n_samples: int, seed: int) -> Tuple[float, float]:
    """Mean and standard error of sampler(rng, size) accumulated over chunks."""
    total = 0.0
    total_sq = 0.0
    for key, size in _chunks(n_samples):
        values = sampler(stream(seed, key), size)
        total += float(np.sum(values))
        total_sq += float(np.sum(values * values))
    mean = total / n_samples
    var = max(total_sq / n_samples - mean * mean, 0.0)
    return mean, math.sqrt(var / n_samples)


def moment_Ir(
    r: int,
    method: str = "closed",
    n_samples: int = 1_000_000,
    seed: int = 0,
    tol: float = 1e-10,
) -> MomentEstimate:
    """
    I_r = E[|Z1 Z3 - Z2^2| (Z1 - 3 Z3)^r] with (Z1, Z2, Z3) of covariance
    [[3, 0, 1], [0, 1, 0], [1, 0, 3]].

    Raises:
        DomainError: On an unknown method, or r without a closed form
    """
    if method == "closed":
        if r not in CLOSED_MOMENTS:
            raise DomainError(f"no closed form for I_{r}")
        return MomentEstimate(r=r, method=method, value=CLOSED_MOMENTS[r])
    if method == "montecarlo":
        chol = np.linalg.cholesky(Z_COVARIANCE)

        def sampler(rng, size):
            z = rng.standard_normal((size, 3)) @ chol.T
            return np.abs(z[:, 0] * z[:, 2] - z[:, 1] ** 2) * (z[:, 0] - 3.0 * z[:, 2]) ** r

        value, stderr = _mc_mean(sampler, n_samples, seed)
        return MomentEstimate(
            r=r, method=method, value=value, stderr=stderr, n_samples=n_samples
        )
    if method == "liwei":
        weight = poly_power(poly_linear([1.0, 0.0, -3.0]), r, 3)
        value = gaussian_abs_moment(Z_FORM, Z_COVARIANCE, weight, tol)
        return MomentEstimate(r=r, method=method, value=value)
    raise DomainError(f"unknown method {method}")


def _gradient_factor(q: int, y: np.ndarray) -> np.ndarray:
    """
    Unbiased sample of H_q(0): E[2^((q+1)/2) exp(-Y^2/2) H_q(Y)] = H_q(0)
    for Y standard normal.
    """
    return 2.0 ** ((q + 1) / 2.0) * np.exp(-0.5 * y * y) * _hermite_at(q, y)


def _y_sample(pattern: Pattern):
    """
    Sampler of the Hessian factor times the gradient weight.

    Even gradient indices enter through their exact weight H_q(0); an odd
    index has weight 0, and is sampled through _gradient_factor so that the
    estimate of the vanishing coefficient carries a real standard error.
    """
    q1, q2, q3, q4, q5 = pattern
    odd = [q for q in (q1, q2) if q % 2 == 1]
    exact = float(np.prod([_hermite_at(q, 0.0) for q in (q1, q2) if q % 2 == 0]))

    def sampler(rng, size):
        y = rng.standard_normal((size, 3 + len(odd)))
        y3, y4, y5 = y[:, 0], y[:, 1], y[:, 2]
        quad = y3 * y5 / math.sqrt(8.0) + (y3 * y3 - y4 * y4) / 8.0
        values = exact * np.abs(quad) * _hermite_at(q3, y3) * _hermite_at(q4, y4) * _hermite_at(q5, y5)
        for column, q in enumerate(odd, start=3):
            values = values * _gradient_factor(q, y[:, column])
        return values

    return sampler


def projection_coefficient(
    pattern,
    method: str = "closed",
    n_samples: int = 1_000_000,
    seed: int = 0,
    tol: float = 1e-10,
) -> CoefficientEstimate:
    """
    (1/pi) H_{q1}(0) H_{q2}(0) E[|Y3 Y5/sqrt 8 + Y3^2/8 - Y4^2/8| H_{q3}(Y3) H_{q4}(Y4) H_{q5}(Y5)].

    The closed method covers the five non-zero patterns of the leading
    covariance (k2 on H4 of a gradient component, k5 on H4(Y5) and h25 on
    H2 of a gradient component times H2(Y5)) plus every vanishing pattern.

    Raises:
        UnsupportedPattern: If the pattern is not of order 4, or has no
            closed form under method="closed"
        DomainError: On an unknown method
    """
    pattern = _check_pattern(pattern)
    weight = gradient_weight(pattern)

    if method == "closed":
        if is_vanishing(pattern):
            return CoefficientEstimate(pattern=pattern, method=method, value=0.0)
        if pattern not in _CLOSED_PATTERNS:
            raise UnsupportedPattern(f"no closed form for pattern {pattern}")
        return CoefficientEstimate(
            pattern=pattern, method=method, value=_CLOSED_PATTERNS[pattern]
        )
    if method == "montecarlo":
        mean, stderr = _mc_mean(_y_sample(pattern), n_samples, seed)
        return CoefficientEstimate(
            pattern=pattern,
            method=method,
            value=mean / math.pi,
            stderr=stderr / math.pi,
            n_samples=n_samples,
        )
    if method == "liwei":
        if weight == 0.0:
            return CoefficientEstimate(pattern=pattern, method=method, value=0.0)
        poly = poly_constant(3)
        for var, q in enumerate(pattern[2:]):
            poly = poly_mul(poly, poly_hermite(q, var, 3))
        value = gaussian_abs_moment(Y_FORM, np.eye(3), poly, tol)
        return CoefficientEstimate(
            pattern=pattern, method=method, value=weight / math.pi * value
        )
    raise DomainError(f"unknown method {method}")


def coeff_report(
    method: str = "closed", n_samples: int = 1_000_000, seed: int = 0
) -> CoeffReport:
    """k2, k5, h25 and I0, I2, I4 by one method."""
    if method not in METHODS:
        raise DomainError(f"unknown method {method}")
    named = {
        "k2": (4, 0, 0, 0, 0),
        "k5": (0, 0, 0, 0, 4),
        "h25": (2, 0, 0, 0, 2),
    }
    values = {}
    stderr = {}
    for offset, (name, pattern) in enumerate(named.items()):
        est = projection_coefficient(pattern, method, n_samples, seed + offset)
        values[name] = est.value
        stderr[name] = est.stderr
    for offset, r in enumerate((0, 2, 4)):
        est = moment_Ir(r, method, n_samples, seed + 10 + offset)
        values[f"I{r}"] = est.value
        stderr[f"I{r}"] = est.stderr
    logger.info("coefficient report (%s): %s", method, values)
    return CoeffReport(method=method, stderr=stderr, **values)


def closed_value(pattern) -> Optional[float]:
    """Closed-form value of a pattern, or None when none is known."""
    pattern = _check_pattern(pattern)
    if is_vanishing(pattern):
        return 0.0
    return _CLOSED_PATTERNS.get(pattern)
