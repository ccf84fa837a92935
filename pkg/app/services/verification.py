"""
Verification service layer.
Pass/fail suites over the closed-form identities and their numerical
oracles; the CLI exits non-zero when a suite fails.
"""

import math
from typing import Callable, Dict, List, Optional

import numpy as np

from app.schemas.field import Interval
from app.schemas.theory import CheckResult, VerificationReport
from app.services.coefficients import (
    CLOSED_MOMENTS,
    coeff_report,
    fourth_order_patterns,
    is_vanishing,
    moment_Ir,
    projection_coefficient,
)
from app.services.critical_points import locate_critical_points
from app.services.integrals import (
    Z_COVARIANCE,
    Z_FORM,
    dominant_covariance_terms,
    lemma_bound_integral,
    lemma_integral,
    liwei_expectation,
    odd_pattern_term,
    quadratic_form_determinant,
)
from app.services.polyspectra import build_grid, field_on_grid, sample_polyspectrum
from app.services.rng import generator
from app.services.sphere_field import eval_jets, sample_field, sigma_and_cholesky
from app.services.theory import (
    CLOSED_H25,
    CLOSED_K2,
    CLOSED_K5,
    density_p3c,
    density_pi1c,
    integrate_density,
    nu_c,
)
from app.utils.errors import DomainError
from app.utils.logging_config import get_logger

logger = get_logger(__name__)

LEMMA_LADDER = (64, 128, 256, 512, 1024, 2048)
BOUND_LADDER = (64, 128, 256, 512)


def _check(suite: str, name: str, expected: float, observed: float, tolerance: float) -> CheckResult:
    return CheckResult(
        suite=suite,
        name=name,
        expected=expected,
        observed=observed,
        tolerance=tolerance,
        passed=bool(abs(observed - expected) <= tolerance),
    )


def slope_vs_log(ells, values) -> float:
    """Least-squares slope of values against log(ell)."""
    slope, _ = np.polyfit(np.log(np.asarray(ells, dtype=float)), np.asarray(values), 1)
    return float(slope)


def verify_coeffs(mc_samples: int = 1_000_000, tol: float = 1e-6, seed: int = 0) -> List[CheckResult]:
    suite = "coeffs"
    checks = []
    closed = coeff_report("closed")
    for name, value in closed.identity_residuals().items():
        checks.append(_check(suite, f"identity {name} (closed)", 0.0, value, 1e-12))

    for offset, (name, pattern, target) in enumerate(
        (
            ("k2", (0, 4, 0, 0, 0), CLOSED_K2),
            ("k5", (0, 0, 0, 0, 4), CLOSED_K5),
            ("h25", (0, 2, 0, 0, 2), CLOSED_H25),
        )
    ):
        est = projection_coefficient(pattern, "montecarlo", mc_samples, seed + offset)
        checks.append(_check(suite, f"{name} montecarlo", target, est.value, 3.0 * est.stderr))
        exact = projection_coefficient(pattern, "liwei", tol=tol * 1e-3)
        checks.append(_check(suite, f"{name} characteristic integral", target, exact.value, tol))

    checks.append(
        _check(suite, "E|Z1 Z3 - Z2^2|", CLOSED_MOMENTS[0], liwei_expectation(Z_FORM, Z_COVARIANCE), tol)
    )
    checks.append(_check(suite, "E|Z^T I Z| = 3", 3.0, liwei_expectation(np.eye(3), np.eye(3)), tol))
    checks.append(
        _check(
            suite,
            "E|Z1^2 - Z2^2| = 4/pi",
            4.0 / math.pi,
            liwei_expectation(np.diag([1.0, -1.0, 0.0]), np.eye(3)),
            tol,
        )
    )
    t = 0.7
    det = quadratic_form_determinant(Z_FORM, Z_COVARIANCE, t)
    checks.append(_check(suite, "det real part 1 + 12 t^2", 1.0 + 12.0 * t * t, det.real, 1e-12))
    checks.append(_check(suite, "det imaginary part 16 t^3", 16.0 * t**3, det.imag, 1e-12))

    for offset, r in enumerate((2, 4)):
        est = moment_Ir(r, "montecarlo", mc_samples, seed + 10 + offset)
        checks.append(_check(suite, f"I{r} montecarlo", CLOSED_MOMENTS[r], est.value, 3.0 * est.stderr))
        exact = moment_Ir(r, "liwei", tol=tol * 1e-3)
        checks.append(
            _check(suite, f"I{r} characteristic integral", CLOSED_MOMENTS[r], exact.value, tol * CLOSED_MOMENTS[r])
        )

    for offset, pattern in enumerate(p for p in fourth_order_patterns() if is_vanishing(p)):
        est = projection_coefficient(pattern, "montecarlo", mc_samples, seed + 100 + offset)
        checks.append(_check(suite, f"vanishing {pattern}", 0.0, est.value, 3.0 * est.stderr))
    return checks


def verify_integrals(tol: float = 0.1) -> List[CheckResult]:
    suite = "integrals"
    checks = [
        _check(suite, "ell=2 r=(0,0) is 3/35", 3.0 / 35.0, lemma_integral(2, 0, 0).value, 1e-12)
    ]
    exact = lemma_integral(64, 1, 1).value
    adaptive = lemma_integral(64, 1, 1, method="adaptive").value
    checks.append(_check(suite, "exact vs adaptive ell=64 r=(1,1)", exact, adaptive, 1e-8 * abs(exact)))

    for r1, r2 in ((0, 0), (1, 1), (2, 2), (0, 1)):
        scaled = [
            lemma_integral(ell, r1, r2).value * ell**2 / float(ell) ** (2 * (r1 + r2))
            for ell in LEMMA_LADDER
        ]
        target = (2.0 + (-1.0) ** (r1 + r2)) / (2.0 * math.pi**2)
        checks.append(
            _check(suite, f"log slope r=({r1},{r2})", target, slope_vs_log(LEMMA_LADDER, scaled), tol * target)
        )

    for k in range(1, 5):
        ratios = [lemma_bound_integral(ell, k) / float(ell) ** 6 for ell in BOUND_LADDER]
        growth = slope_vs_log(BOUND_LADDER, np.log(ratios))
        checks.append(_check(suite, f"bound k={k}: no power growth", 0.0, growth, 0.1))

    terms = dominant_covariance_terms(512)
    for name in ("gradient", "hessian", "cross"):
        ratio = getattr(terms, f"{name}_term") / getattr(terms, f"{name}_target")
        checks.append(_check(suite, f"{name} term ratio at ell=512", 1.0, ratio, 0.5))
    checks.append(_check(suite, "E[Y1 f] on the equator", 0.0, terms.max_abs_y1, 1e-12))
    checks.append(_check(suite, "E[Y4 f] on the equator", 0.0, terms.max_abs_y4, 1e-12))

    odd = [abs(odd_pattern_term(ell)) * ell**2 / math.log(ell) for ell in (64, 1024)]
    checks.append(_check(suite, "odd pattern term decays against log", 0.0, max(odd[1] - odd[0], 0.0), 0.0))
    return checks


def verify_sigma(tol: float = 1e-12) -> List[CheckResult]:
    suite = "sigma"
    checks = []
    for ell in (2, 3, 10, 100, 10_000):
        jc = sigma_and_cholesky(ell)
        scale = float(np.max(np.abs(jc.sigma)))
        residual = float(np.max(np.abs(jc.cholesky @ jc.cholesky.T - jc.sigma))) / scale
        checks.append(_check(suite, f"Lambda Lambda^T = sigma, ell={ell}", 0.0, residual, tol))
    return checks


def verify_densities(tol: float = 1e-8) -> List[CheckResult]:
    suite = "densities"
    whole = Interval()
    upper = Interval(lo=0.0)
    return [
        _check(suite, "pi1c(0)", math.sqrt(3.0) / math.sqrt(8.0 * math.pi), float(density_pi1c(0.0)), 1e-15),
        _check(suite, "int pi1c = 1", 1.0, integrate_density(density_pi1c, whole), tol),
        _check(suite, "int p3c over R = 0", 0.0, integrate_density(density_p3c, whole), tol),
        _check(suite, "int p3c over [0, inf) = 0", 0.0, integrate_density(density_p3c, upper), tol),
        CheckResult(
            suite=suite,
            name="nu_c([1, inf)) > 0",
            expected=0.0,
            observed=nu_c(Interval(lo=1.0)),
            tolerance=0.0,
            passed=nu_c(Interval(lo=1.0)) > 0.0,
        ),
    ]


def verify_fields(
    ells=(2, 10, 30), seed: int = 0, n_points: int = 100, tol: float = 1e-8
) -> List[CheckResult]:
    suite = "fields"
    checks = []
    rng = generator(seed)
    for ell in ells:
        field = sample_field(ell, seed + ell)
        grid = build_grid(ell, 4)
        values = field_on_grid(field, grid)
        h0 = sample_polyspectrum(field, 0, grid, values)
        h1 = sample_polyspectrum(field, 1, grid, values)
        checks.append(_check(suite, f"h0 = 4 pi, ell={ell}", 4.0 * math.pi, h0, 1e-10))
        checks.append(_check(suite, f"h1 = 0, ell={ell}", 0.0, h1, 1e-10))

        theta = np.arccos(rng.uniform(-1.0, 1.0, n_points))
        phi = rng.uniform(0.0, 2.0 * math.pi, n_points)
        jets = eval_jets(field, theta, phi)
        lam = ell * (ell + 1)
        trace = float(np.max(np.abs(jets[3] + jets[5] + lam * jets[0])))
        scale = lam * max(float(np.max(np.abs(jets[0]))), 1.0)
        checks.append(_check(suite, f"Laplacian trace, ell={ell}", 0.0, trace / scale, tol))

        points = locate_critical_points(field)
        morse = int(np.sum(points.kind == -1) - np.sum(points.kind == 0) + np.sum(points.kind == 1))
        checks.append(_check(suite, f"Morse relation, ell={ell}", 2.0, float(morse), 0.0))
        if ell == 2:
            checks.append(_check(suite, "ell=2 has six critical points", 6.0, float(points.theta.size), 0.0))
    return checks


SUITES: Dict[str, Callable[..., List[CheckResult]]] = {
    "coeffs": verify_coeffs,
    "integrals": verify_integrals,
    "sigma": verify_sigma,
    "densities": verify_densities,
    "fields": verify_fields,
}

# What the tol override of each suite scales
TOLERANCE_MEANING: Dict[str, str] = {
    "coeffs": "absolute error of the characteristic-function integrals (default 1e-6)",
    "integrals": "relative error of the asymptotic log-slopes (default 0.1)",
    "sigma": "relative residual of Lambda Lambda^T - sigma (default 1e-12)",
    "densities": "absolute quadrature error of the density integrals (default 1e-8)",
    "fields": "relative residual of the Laplacian trace (default 1e-8)",
}


def run_suite(name: str, mc_samples: Optional[int] = None, tol: Optional[float] = None) -> VerificationReport:
    """
    Run one named suite.

    Args:
        name: Suite name, a key of SUITES
        mc_samples: Monte Carlo sample count (coeffs only)
        tol: Override of the suite's own tolerance; see TOLERANCE_MEANING

    Raises:
        DomainError: On an unknown suite name
    """
    if name not in SUITES:
        raise DomainError(f"unknown suite {name}; choose from {', '.join(SUITES)}")
    kwargs = {}
    if tol is not None:
        kwargs["tol"] = tol
    if mc_samples is not None and name == "coeffs":
        kwargs["mc_samples"] = mc_samples
    checks = SUITES[name](**kwargs)
    report = VerificationReport(suite=name, checks=checks)
    logger.info(
        "suite %s: %d/%d checks passed",
        name,
        sum(c.passed for c in checks),
        len(checks),
    )
    return report
