"""
Polyspectra service layer.
Hermite polynomials, band-limit-exact sphere grids, sample polyspectra and
their exact finite-degree variances.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.polynomial import hermite_e

from app.services.legendre import gauss_legendre, legendre_values
from app.services.sphere_field import HarmonicField, synthesize_grid
from app.utils.errors import DomainError, GridTooSmall


@dataclass(frozen=True)
class SphereGrid:
    """
    Gauss-Legendre colatitudes times uniform longitudes.

    Integrates every spherical polynomial of degree <= qmax * ell exactly.
    """

    ell: int
    qmax: int
    theta_nodes: np.ndarray
    theta_weights: np.ndarray
    n_phi: int

    @property
    def n_theta(self) -> int:
        return int(self.theta_nodes.size)

    @property
    def degree(self) -> int:
        """Highest spherical-polynomial degree integrated exactly."""
        return self.qmax * self.ell

    @property
    def phi_nodes(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n_phi) / self.n_phi

    @property
    def weights(self) -> np.ndarray:
        """Cell weights shaped (n_theta, n_phi); they sum to 4 pi."""
        return np.outer(self.theta_weights, np.full(self.n_phi, 2.0 * np.pi / self.n_phi))

    def integrate(self, values: np.ndarray) -> float:
        """Integrate grid samples shaped (n_theta, n_phi)."""
        row = values.sum(axis=1) * (2.0 * np.pi / self.n_phi)
        return float(np.dot(self.theta_weights, row))


def hermite(q: int, u):
    """Probabilists' Hermite polynomial H_q(u)."""
    if q < 0:
        raise DomainError(f"Hermite index must be non-negative, got {q}")
    coef = np.zeros(q + 1)
    coef[q] = 1.0
    return hermite_e.hermeval(u, coef)


def build_grid(ell: int, qmax: int = 4) -> SphereGrid:
    """
    Grid exact for spherical polynomials of degree qmax * ell.

    n_theta = floor(qmax ell / 2) + 1 and n_phi = qmax ell + 1.
    """
    if ell < 1 or qmax < 1:
        raise DomainError(f"invalid grid request ell={ell}, qmax={qmax}")
    degree = qmax * ell
    rule = gauss_legendre(degree // 2 + 1)
    return SphereGrid(
        ell=ell,
        qmax=qmax,
        theta_nodes=np.arccos(rule.nodes),
        theta_weights=rule.weights,
        n_phi=degree + 1,
    )


def field_on_grid(field: HarmonicField, grid: SphereGrid) -> np.ndarray:
    return synthesize_grid(field.ell, field.coeffs_a, grid.theta_nodes, grid.phi_nodes)


def sample_polyspectrum(
    field: HarmonicField,
    q: int,
    grid: SphereGrid,
    values: Optional[np.ndarray] = None,
) -> float:
    """
    h_{ell;q} = integral over the sphere of H_q(f_ell).

    Args:
        field: Sampled field
        q: Hermite order
        grid: Grid exact to degree >= q * ell
        values: Field values already synthesized on the grid

    Raises:
        GridTooSmall: If the grid cannot integrate H_q(f) exactly
    """
    if grid.degree < q * field.ell:
        raise GridTooSmall(
            f"grid exact to degree {grid.degree} cannot integrate order {q} "
            f"at ell={field.ell}"
        )
    if values is None:
        values = field_on_grid(field, grid)
    return grid.integrate(hermite(q, values))


def polyspectrum_variance_exact(ell: int, q: int) -> float:
    """
    Var(h_{ell;q}) = q! 8 pi^2 int_{-1}^{1} P_ell(x)^q dx, by a rule exact
    for the polynomial integrand.
    """
    if ell < 1 or q < 1:
        raise DomainError(f"invalid variance request ell={ell}, q={q}")
    rule = gauss_legendre((q * ell) // 2 + 1)
    p, _, _ = legendre_values(ell, rule.nodes)
    return math.factorial(q) * 8.0 * np.pi**2 * rule.integrate(p**q)
