"""
Legendre service layer.
Legendre polynomials, normalized associated Legendre functions, high-degree
asymptotics and Gauss-Legendre rules.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.special import roots_legendre

from app.config import settings
from app.schemas.field import LegendreTriple
from app.utils.errors import DomainError
from app.utils.logging_config import get_logger

logger = get_logger(__name__)

# Mantissa rescaling threshold for the associated Legendre recurrence
_BIG = 1e150
_LOG_BIG = np.log(_BIG)


@dataclass(frozen=True)
class QuadratureRule1D:
    """Gauss-Legendre rule on [-1, 1]."""

    nodes: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    def integrate(self, values: np.ndarray) -> float:
        """Integrate samples taken at the nodes."""
        return float(np.dot(self.weights, values))

    def scaled(self, a: float, b: float) -> "QuadratureRule1D":
        """Affine copy of the rule on [a, b]."""
        half = 0.5 * (b - a)
        return QuadratureRule1D(
            nodes=a + half * (self.nodes + 1.0), weights=half * self.weights
        )


def _check_unit_interval(x: np.ndarray) -> None:
    if np.any(np.abs(x) > 1.0) or np.any(~np.isfinite(x)):
        raise DomainError("Legendre argument must lie in [-1, 1]")


def legendre_values(
    ell: int, x: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Vectorized P_ell, P_ell' and P_ell'' on an array of arguments.

    The derivatives come from the division-free recurrences
    P'_{n+1} = P'_{n-1} + (2n+1) P_n and P''_{n+1} = P''_{n-1} + (2n+1) P'_n,
    so the endpoints x = +-1 need no special handling.

    Args:
        ell: Degree (>= 0)
        x: Arguments in [-1, 1]

    Returns:
        Tuple (p, dp, ddp) of arrays shaped like x

    Raises:
        DomainError: If ell < 0 or any |x| > 1
    """
    if ell < 0:
        raise DomainError(f"degree must be non-negative, got {ell}")
    x = np.asarray(x, dtype=float)
    _check_unit_interval(x)

    p_prev, p_cur = np.zeros_like(x), np.ones_like(x)
    d_prev, d_cur = np.zeros_like(x), np.zeros_like(x)
    dd_prev, dd_cur = np.zeros_like(x), np.zeros_like(x)
    for n in range(ell):
        # step n -> n + 1
        p_next = ((2 * n + 1) * x * p_cur - n * p_prev) / (n + 1)
        d_next = d_prev + (2 * n + 1) * p_cur
        dd_next = dd_prev + (2 * n + 1) * d_cur
        p_prev, p_cur = p_cur, p_next
        d_prev, d_cur = d_cur, d_next
        dd_prev, dd_cur = dd_cur, dd_next

    return p_cur, d_cur, dd_cur


def legendre_eval(ell: int, x: float) -> LegendreTriple:
    """
    Evaluate P_ell and its first two derivatives at one point.

    Endpoint values use the closed forms P'(1) = ell(ell+1)/2 and
    P''(1) = (ell-1)ell(ell+1)(ell+2)/8, mirrored with the parity of ell at -1.

    Args:
        ell: Degree (>= 0)
        x: Argument in [-1, 1]

    Returns:
        LegendreTriple with p, dp, ddp

    Raises:
        DomainError: If |x| > 1
    """
    if abs(x) == 1.0 and ell >= 0:
        sign = 1.0 if x > 0 else -1.0
        parity = sign**ell
        return LegendreTriple(
            p=parity,
            dp=parity * sign * ell * (ell + 1) / 2.0,
            ddp=parity * (ell - 1) * ell * (ell + 1) * (ell + 2) / 8.0,
        )
    p, dp, ddp = legendre_values(ell, np.array([x], dtype=float))
    return LegendreTriple(p=float(p[0]), dp=float(dp[0]), ddp=float(ddp[0]))


def _log_diagonal(ell: int) -> np.ndarray:
    """log of the normalized diagonal prefactor a_mm, m = 0..ell."""
    k = np.arange(1, ell + 1, dtype=float)
    log_terms = np.concatenate(([0.0], np.cumsum(np.log((2 * k + 1) / (2 * k)))))
    return 0.5 * log_terms - 0.5 * np.log(4.0 * np.pi)


def assoc_legendre_table(ell: int, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Normalized associated Legendre values for every order m = 0..ell.

    The recurrence runs over the degree with all orders updated at once; each
    order carries a mantissa and a natural-log exponent so the diagonal start
    (1 - x^2)^{m/2} never underflows.

    Args:
        ell: Degree (>= 0)
        x: Arguments in [-1, 1], any shape (flattened)

    Returns:
        Tuple (p_ell, p_prev) shaped (ell + 1, n) with degree ell and ell - 1
        values; p_prev[m] is zero where m > ell - 1
    """
    x = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
    _check_unit_interval(x)
    n_pts = x.size

    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    with np.errstate(divide="ignore"):
        log_s = np.log(s)
    log_amm = _log_diagonal(ell)

    orders = np.arange(ell + 1)
    with np.errstate(invalid="ignore"):
        exponent = log_amm[:, None] + np.where(
            orders[:, None] > 0, orders[:, None] * log_s[None, :], 0.0
        )

    prev2 = np.zeros((ell + 1, n_pts))
    prev1 = np.zeros((ell + 1, n_pts))
    for n in range(ell + 1):
        cur = np.zeros((ell + 1, n_pts))
        cur[n] = 1.0
        if n >= 1:
            m = np.arange(n, dtype=float)
            a = np.sqrt((4.0 * n * n - 1.0) / (n * n - m * m))
            b = np.zeros(n)
            inner = m < n - 1
            b[inner] = -np.sqrt(
                (2.0 * n + 1.0)
                * ((n - 1.0) ** 2 - m[inner] ** 2)
                / ((2.0 * n - 3.0) * (n * n - m[inner] ** 2))
            )
            cur[:n] = a[:, None] * x[None, :] * prev1[:n] + b[:, None] * prev2[:n]

        big = np.abs(cur) > _BIG
        if np.any(big):
            cur = np.where(big, cur / _BIG, cur)
            prev1 = np.where(big, prev1 / _BIG, prev1)
            exponent = np.where(big, exponent + _LOG_BIG, exponent)
        prev2, prev1 = prev1, cur

    def _restore(mantissa: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            out = np.sign(mantissa) * np.exp(exponent + np.log(np.abs(mantissa)))
        return np.nan_to_num(out, nan=0.0)

    return _restore(prev1), _restore(prev2)


def assoc_legendre_norm(ell: int, m: int, x: float) -> float:
    """
    Fully normalized associated Legendre value without Condon-Shortley phase.

    The real basis Y_l0 = p, Y_lm = sqrt(2) p cos(m phi),
    Y_l,-m = sqrt(2) p sin(m phi) built from it is orthonormal on the sphere.

    Raises:
        DomainError: On invalid (ell, m, x)
    """
    if ell < 0 or m < 0 or m > ell:
        raise DomainError(f"invalid degree/order ({ell}, {m})")
    if abs(x) > 1.0:
        raise DomainError("Legendre argument must lie in [-1, 1]")
    table, _ = assoc_legendre_table(ell, np.array([x]))
    return float(table[m, 0])


def assoc_legendre_theta_derivs(
    ell: int, theta: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Normalized associated Legendre functions of cos(theta) with their first
    and second theta-derivatives, all orders at once.

    Requires sin(theta) > 0; callers keep theta away from the poles.

    Returns:
        Tuple (value, d_theta, d2_theta), each shaped (ell + 1, n)
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float)).ravel()
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    if np.any(sin_t <= 0.0):
        raise DomainError("theta-derivatives are undefined at the poles")

    value, prev = assoc_legendre_table(ell, cos_t)
    m = np.arange(ell + 1, dtype=float)[:, None]
    if ell == 0:
        d1 = np.zeros_like(value)
    else:
        coupling = np.sqrt((2.0 * ell + 1.0) * (ell * ell - m * m) / (2.0 * ell - 1.0))
        d1 = (ell * cos_t * value - coupling * prev) / sin_t
    lam = ell * (ell + 1.0)
    d2 = -(cos_t / sin_t) * d1 - (lam - m * m / sin_t**2) * value
    return value, d1, d2


_HILB_SIGN = {0: 1.0, 1: -1.0, 2: -1.0}
_HILB_PHASE = {0: -np.pi / 4.0, 1: np.pi / 4.0, 2: -np.pi / 4.0}


def hilb_approx(ell: int, r: int, phi: float) -> Tuple[float, float]:
    """
    Main oscillatory term of P_ell^{(r)}(cos phi) with its error envelope.

    The main term is sqrt(2/pi) (ell + 1/2)^{r - 1/2} / sin^{r + 1/2}(phi)
    times s_r cos(psi), with psi = (ell + 1/2) phi - pi/4 for r = 0, 2 and
    (ell + 1/2) phi + pi/4 for r = 1, and s_r = +1, -1, -1 for r = 0, 1, 2.
    The envelope is HC_HILB_ENVELOPE times the remainder order:
    1/sqrt(ell phi), 1/(sqrt(ell) phi^{5/2}), sqrt(ell)/phi^{7/2}.

    The asymptotics are classically stated on C/ell <= phi <= pi/ell in one
    reference and used on [C/ell, pi/2]; the wider range is accepted here.

    Args:
        ell: Degree (>= 1)
        r: Derivative order, 0, 1 or 2
        phi: Angle in [C/ell, pi/2]

    Returns:
        Tuple (approx, envelope)

    Raises:
        DomainError: If phi is outside [C/ell, pi/2] or r is not 0, 1, 2
    """
    if r not in _HILB_SIGN:
        raise DomainError(f"derivative order must be 0, 1 or 2, got {r}")
    if ell < 1:
        raise DomainError(f"degree must be positive, got {ell}")
    lower = settings.HC_HILB_C / ell
    if phi < lower or phi > np.pi / 2.0:
        raise DomainError(
            f"phi={phi} outside the asymptotic range [{lower:.3e}, pi/2]"
        )

    nu = ell + 0.5
    psi = nu * phi + _HILB_PHASE[r]
    approx = (
        np.sqrt(2.0 / np.pi)
        * nu ** (r - 0.5)
        / np.sin(phi) ** (r + 0.5)
        * _HILB_SIGN[r]
        * np.cos(psi)
    )
    if r == 0:
        order = 1.0 / np.sqrt(ell * phi)
    elif r == 1:
        order = 1.0 / (np.sqrt(ell) * phi**2.5)
    else:
        order = np.sqrt(ell) / phi**3.5
    return float(approx), float(settings.HC_HILB_ENVELOPE * order)


def gauss_legendre(n: int) -> QuadratureRule1D:
    """
    Gauss-Legendre rule with n nodes.

    Nodes are symmetrized about 0 and the weights rescaled to sum to 2.

    Raises:
        DomainError: If n < 1
    """
    if n < 1:
        raise DomainError(f"rule size must be positive, got {n}")
    nodes, weights = roots_legendre(n)
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    weights = weights * (2.0 / weights.sum())
    return QuadratureRule1D(nodes=nodes, weights=weights)
