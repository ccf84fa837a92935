"""
Integral service layer.
Absolute moments of Gaussian quadratic forms through their characteristic
function, oscillatory Legendre-power quadrature and the finite-degree
integrals behind the leading covariance of critical points with h_{ell;4}.
"""

import math
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from numpy.polynomial import hermite_e
from scipy import integrate, linalg

from app.schemas.field import SpherePoint
from app.schemas.theory import DominantTerms, LemmaIntegral, PredictedCovariance
from app.services.legendre import gauss_legendre, legendre_values
from app.services.sphere_field import (
    cholesky_entries,
    covariance_jet,
    jet_basis,
    sigma_and_cholesky,
)
from app.services.theory import CLOSED_H25, CLOSED_K2, CLOSED_K5
from app.utils.errors import DomainError, QuadratureError
from app.utils.logging_config import get_logger

logger = get_logger(__name__)

Monomial = Tuple[int, ...]
Polynomial = Dict[Monomial, complex]

# Quadratic form Z1 Z3 - Z2^2 and the law of (Z1, Z2, Z3)
Z_FORM = np.array([[0.0, 0.0, 0.5], [0.0, -1.0, 0.0], [0.5, 0.0, 0.0]])
Z_COVARIANCE = np.array([[3.0, 0.0, 1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 3.0]])
# Quadratic form Y3 Y5 / sqrt(8) + Y3^2 / 8 - Y4^2 / 8 on standard (Y3, Y4, Y5)
Y_FORM = np.array(
    [
        [1.0 / 8.0, 0.0, 0.5 / math.sqrt(8.0)],
        [0.0, -1.0 / 8.0, 0.0],
        [0.5 / math.sqrt(8.0), 0.0, 0.0],
    ]
)

_SMALL_T = 1e-4


# Polynomials in Gaussian variables


def poly_constant(dim: int, value: complex = 1.0) -> Polynomial:
    return {(0,) * dim: value}


def poly_mul(p: Polynomial, q: Polynomial) -> Polynomial:
    out: Polynomial = {}
    for ea, ca in p.items():
        for eb, cb in q.items():
            key = tuple(a + b for a, b in zip(ea, eb))
            out[key] = out.get(key, 0.0) + ca * cb
    return out


def poly_quadratic(form: np.ndarray) -> Polynomial:
    """z^T B z as a polynomial."""
    dim = form.shape[0]
    out: Polynomial = {}
    for i in range(dim):
        for j in range(dim):
            if form[i, j] != 0.0:
                e = [0] * dim
                e[i] += 1
                e[j] += 1
                out[tuple(e)] = out.get(tuple(e), 0.0) + form[i, j]
    return out


def poly_linear(coeffs) -> Polynomial:
    dim = len(coeffs)
    out: Polynomial = {}
    for i, c in enumerate(coeffs):
        if c != 0.0:
            e = [0] * dim
            e[i] = 1
            out[tuple(e)] = c
    return out


def poly_power(p: Polynomial, n: int, dim: int) -> Polynomial:
    out = poly_constant(dim)
    for _ in range(n):
        out = poly_mul(out, p)
    return out


def poly_hermite(q: int, var: int, dim: int) -> Polynomial:
    """H_q of coordinate `var` as a polynomial."""
    unit = np.zeros(q + 1)
    unit[q] = 1.0
    out: Polynomial = {}
    for k, c in enumerate(hermite_e.herme2poly(unit)):
        if c != 0.0:
            e = [0] * dim
            e[var] = k
            out[tuple(e)] = float(c)
    return out


def gaussian_moment(exponents: Monomial, cov: np.ndarray, cache: dict) -> complex:
    """E[prod Z_i^{e_i}] for a centred Gaussian by Isserlis' recursion."""
    total = sum(exponents)
    if total == 0:
        return 1.0
    if total % 2:
        return 0.0
    if exponents in cache:
        return cache[exponents]
    i = next(k for k, e in enumerate(exponents) if e > 0)
    rest = list(exponents)
    rest[i] -= 1
    value = 0.0
    for j, e in enumerate(rest):
        if e > 0 and cov[i, j] != 0.0:
            reduced = list(rest)
            reduced[j] -= 1
            value += e * cov[i, j] * gaussian_moment(tuple(reduced), cov, cache)
    cache[exponents] = value
    return value


def poly_expectation(p: Polynomial, cov: np.ndarray) -> complex:
    cache: dict = {}
    return sum(c * gaussian_moment(e, cov, cache) for e, c in p.items())


# Characteristic-function integrals


def quadratic_form_determinant(form: np.ndarray, cov: np.ndarray, t: float) -> complex:
    """det(I - 2 i t Sigma A)."""
    dim = form.shape[0]
    return complex(np.linalg.det(np.eye(dim) - 2j * t * cov @ form))


def gaussian_abs_moment(
    form: np.ndarray,
    cov: np.ndarray,
    weight: Optional[Polynomial] = None,
    tol: float = 1e-10,
) -> float:
    """
    E[|Z^T A Z| p(Z)] for Z ~ N(0, Sigma) and a polynomial weight p.

    Uses |x| = (2/pi) int_0^inf (1 - cos(t x)) / t^2 dt, so the moment is
    (2/pi) int_0^inf (E[p] - Re E[p(Z) e^{i t Z^T A Z}]) / t^2 dt. The inner
    expectation is det(I - 2 i t Sigma A)^{-1/2} times the Wick moment of p
    under the complex covariance (I - 2 i t Sigma A)^{-1} Sigma. The
    determinant root is the product of principal roots of 1 - 2 i t mu_k over
    the (real) eigenvalues mu_k of Sigma A.

    Raises:
        QuadratureError: If either half-line integral misses the tolerance
    """
    form = np.asarray(form, dtype=float)
    cov = np.asarray(cov, dtype=float)
    dim = form.shape[0]
    if weight is None:
        weight = poly_constant(dim)

    mean_weight = float(np.real(poly_expectation(weight, cov)))
    quad_form = poly_quadratic(form)
    curvature = 0.5 * float(
        np.real(poly_expectation(poly_mul(weight, poly_mul(quad_form, quad_form)), cov))
    )
    mu = np.real(np.linalg.eigvals(cov @ form))
    eye = np.eye(dim)

    def integrand(t: float) -> float:
        if t < _SMALL_T:
            return curvature
        root = np.prod((1.0 - 2j * t * mu) ** -0.5)
        cov_t = np.linalg.solve(eye - 2j * t * cov @ form, cov)
        char = root * poly_expectation(weight, cov_t)
        return (mean_weight - char.real) / (t * t)

    total = 0.0
    for a, b in ((0.0, 1.0), (1.0, np.inf)):
        value, err = integrate.quad(integrand, a, b, epsabs=tol, epsrel=tol, limit=400)
        if err > max(1e3 * tol, 1e-7 * abs(value)):
            raise QuadratureError("characteristic-function integral", achieved=err)
        total += value
    return 2.0 / math.pi * total


def liwei_expectation(form: np.ndarray, cov: np.ndarray, tol: float = 1e-10) -> float:
    """E|Z^T A Z| for Z ~ N(0, Sigma)."""
    return gaussian_abs_moment(form, cov, None, tol)


# Oscillatory quadrature


def panel_gauss(
    fn: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    ell: int,
    tol: float = 1e-10,
    nodes_per_panel: int = 20,
    max_doublings: int = 10,
) -> float:
    """
    Composite Gauss quadrature with at least ten nodes per period 2 pi/ell,
    doubling the panel count until successive sums agree to `tol` (relative).

    Raises:
        QuadratureError: If the tolerance is not reached
    """
    rule = gauss_legendre(nodes_per_panel)
    period = 2.0 * math.pi / max(ell, 1)
    n_panels = max(1, math.ceil((b - a) / period * 10.0 / nodes_per_panel))

    def composite(n: int) -> float:
        edges = np.linspace(a, b, n + 1)
        half = 0.5 * (edges[1:] - edges[:-1])
        mid = 0.5 * (edges[1:] + edges[:-1])
        x = (mid[:, None] + half[:, None] * rule.nodes[None, :]).ravel()
        w = (half[:, None] * rule.weights[None, :]).ravel()
        return float(np.dot(w, fn(x)))

    previous = composite(n_panels)
    change = math.inf
    for _ in range(max_doublings):
        n_panels *= 2
        current = composite(n_panels)
        change = abs(current - previous) / max(abs(current), 1e-300)
        if change <= tol:
            logger.debug("panel quadrature converged with %d panels", n_panels)
            return current
        previous = current
    raise QuadratureError(
        f"panel quadrature on [{a}, {b}] for ell={ell}", achieved=change
    )


# Legendre-power integrals


def _half_rule(ell: int):
    """Gauss-Legendre on [0, 1], exact for polynomials of degree 4 ell."""
    return gauss_legendre(2 * ell + 1).scaled(0.0, 1.0)


def _derivative(ell: int, r: int, x: np.ndarray) -> np.ndarray:
    return legendre_values(ell, x)[r]


def lemma_asymptotic(ell: int, r1: int, r2: int) -> float:
    """(2 + (-1)^{r1 + r2}) ell^{2(r1 + r2)} log(ell) / (2 pi^2 ell^2)."""
    return (
        (2.0 + (-1.0) ** (r1 + r2))
        * float(ell) ** (2 * (r1 + r2))
        * math.log(ell)
        / (2.0 * math.pi**2 * ell**2)
    )


def lemma_integral(ell: int, r1: int, r2: int, method: str = "exact") -> LemmaIntegral:
    """
    int_0^{pi/2} [P^{(r1)}(cos phi) sin^{r1} phi]^2 [P^{(r2)}(cos phi) sin^{r2} phi]^2
    sin phi dphi with its leading asymptotic.

    The "exact" method integrates the degree-4 ell polynomial in x = cos phi
    with a Gauss rule on [0, 1]; "adaptive" runs the panel quadrature in phi.

    Raises:
        DomainError: On ell < 2 or r outside {0, 1, 2}
    """
    if ell < 2 or r1 not in (0, 1, 2) or r2 not in (0, 1, 2):
        raise DomainError(f"invalid lemma integral ({ell}, {r1}, {r2})")
    if method == "exact":
        rule = _half_rule(ell)
        x = rule.nodes
        s2 = 1.0 - x * x
        values = legendre_values(ell, x)
        integrand = values[r1] ** 2 * s2**r1 * values[r2] ** 2 * s2**r2
        value = rule.integrate(integrand)
    elif method == "adaptive":

        def fn(phi):
            x = np.cos(phi)
            s = np.sin(phi)
            values = legendre_values(ell, x)
            return (values[r1] * s**r1) ** 2 * (values[r2] * s**r2) ** 2 * s

        value = panel_gauss(fn, 0.0, math.pi / 2.0, ell, tol=1e-10)
    else:
        raise DomainError(f"unknown method {method}")
    return LemmaIntegral(
        ell=ell, r1=r1, r2=r2, value=value, asymptotic=lemma_asymptotic(ell, r1, r2)
    )


def lemma_bound_integral(ell: int, k: int, tol: float = 1e-4) -> float:
    """int_0^{pi/2} |P'(cos phi)|^k |P''(cos phi) sin^2 phi|^{4-k} sin phi dphi."""
    if not 0 <= k <= 4:
        raise DomainError(f"exponent k must lie in 0..4, got {k}")

    def fn(phi):
        _, dp, ddp = legendre_values(ell, np.cos(phi))
        s = np.sin(phi)
        return np.abs(dp) ** k * np.abs(ddp * s * s) ** (4 - k) * s

    return panel_gauss(fn, 0.0, math.pi / 2.0, ell, tol=tol)


# Dominant covariance terms on the equator


def _alphas(ell: int) -> Tuple[float, float]:
    lam = float(ell * (ell + 1))
    alpha1 = math.sqrt(3.0 * lam - 2.0) / (lam * math.sqrt(lam - 2.0))
    alpha2 = (lam + 2.0) / (lam * math.sqrt(lam - 2.0) * math.sqrt(3.0 * lam - 2.0))
    return alpha1, alpha2


def _equator_covariances(ell: int, x: np.ndarray):
    """E[Y2 f(y)], E[Y3 f(y)], E[Y5 f(y)] at cos(phi) = x (phi in [0, pi/2])."""
    _, dp, ddp = legendre_values(ell, x)
    s2 = 1.0 - x * x
    lam = float(ell * (ell + 1))
    alpha1, alpha2 = _alphas(ell)
    _, _, tau3, _, _ = cholesky_entries(ell)
    y2 = math.sqrt(2.0 / lam) * dp * np.sqrt(s2)
    y3 = -dp * x / tau3
    y5 = alpha1 * (ddp * s2 - dp * x) + alpha2 * dp * x
    return y2, y3, y5


def y_covariances(ell: int, phi: float) -> np.ndarray:
    """
    E[Y_a(x0) f(y(phi))], a = 1..5, for x0 = (pi/2, 0) and y(phi) = (pi/2, phi),
    from the jet covariance whitened by the Cholesky factor.
    """
    x0 = SpherePoint(theta=math.pi / 2.0, phi=0.0)
    y = SpherePoint(theta=math.pi / 2.0, phi=phi)
    jet = covariance_jet(ell, x0, y)[1:]
    return linalg.solve_triangular(sigma_and_cholesky(ell).cholesky, jet, lower=True)


def y_point_covariance(
    ell: int, point: SpherePoint = SpherePoint(theta=math.pi / 2.0, phi=0.0)
) -> np.ndarray:
    """
    E[Y_a Y_b] at one chart-A point, from the exact jets of the basis; the
    identity up to roundoff.
    """
    basis = jet_basis(ell, point)[1:]
    chol = sigma_and_cholesky(ell).cholesky
    whitened = linalg.solve_triangular(chol, basis, lower=True)
    return whitened @ whitened.T


def dominant_covariance_terms(ell: int, n_check: int = 257) -> DominantTerms:
    """
    The three dominant integrals: 4! int E[Y2 f]^4, 4! int E[Y5 f]^4 and
    4! int E[Y2 f]^2 E[Y5 f]^2 against sin phi dphi on [0, pi/2], each a
    polynomial of degree 4 ell in cos phi.

    Also reports max |E[Y1 f]| and max |E[Y4 f]| over the equator, which
    vanish identically.
    """
    if ell < 2:
        raise DomainError(f"dominant terms need ell >= 2, got {ell}")
    rule = _half_rule(ell)
    y2, _, y5 = _equator_covariances(ell, rule.nodes)
    gradient_term = 24.0 * rule.integrate(y2**4)
    hessian_term = 24.0 * rule.integrate(y5**4)
    cross_term = 24.0 * rule.integrate(y2**2 * y5**2)

    scale = 24.0 * math.log(ell) / (math.pi**2 * ell**2)
    phis = np.linspace(0.0, math.pi / 2.0, n_check)[1:]
    whitened = np.array([y_covariances(ell, p) for p in phis])
    return DominantTerms(
        ell=ell,
        gradient_term=gradient_term,
        hessian_term=hessian_term,
        cross_term=cross_term,
        gradient_target=6.0 * scale,
        hessian_target=13.5 * scale,
        cross_target=3.0 * scale,
        max_abs_y1=float(np.max(np.abs(whitened[:, 0]))),
        max_abs_y4=float(np.max(np.abs(whitened[:, 3]))),
    )


def odd_pattern_term(ell: int) -> float:
    """4! int_0^{pi/2} E[Y3 f]^3 E[Y5 f] sin phi dphi (the H3(Y3) H1(Y5) diagram)."""
    rule = _half_rule(ell)
    _, y3, y5 = _equator_covariances(ell, rule.nodes)
    return 24.0 * rule.integrate(y3**3 * y5)


def predicted_cov_from_terms(ell: int) -> PredictedCovariance:
    """
    Finite-degree assembly 16 pi^2 lam [h25 T3 / 4 + (k2 T1 + k5 T2) / 4!]
    of Cov(N^c, h_{ell;4}), and the implied Cov(N^c, A_ell).
    """
    terms = dominant_covariance_terms(ell, n_check=2)
    lam = float(ell * (ell + 1))
    bracket = 0.25 * CLOSED_H25 * terms.cross_term + (
        CLOSED_K2 * terms.gradient_term + CLOSED_K5 * terms.hessian_term
    ) / 24.0
    cov_h4 = 16.0 * math.pi**2 * lam * bracket
    proxy = -lam / (72.0 * math.sqrt(3.0) * math.pi)
    leading_h4 = -24.0 * lam * math.log(ell) / (3.0 * math.sqrt(3.0) * math.pi * ell**2)
    return PredictedCovariance(
        ell=ell,
        cov_crit_h4=cov_h4,
        cov_crit_A=proxy * cov_h4,
        cov_crit_h4_leading=leading_h4,
        cov_crit_A_leading=ell**2 * math.log(ell) / (27.0 * math.pi**2),
    )
