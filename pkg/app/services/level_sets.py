"""
Level-set service layer.
Length of level curves by marching squares and excursion areas by quadrature.
"""

import math
from typing import Optional

import numpy as np

from app.config import settings
from app.services.polyspectra import SphereGrid, field_on_grid
from app.services.sphere_field import (
    CHART_LIMIT,
    ROTATION,
    HarmonicField,
    synthesize_grid,
    unit_vectors,
)
from app.utils.errors import DomainError
from app.utils.logging_config import get_logger

logger = get_logger(__name__)

# Edge k joins corner k to corner k + 1 (mod 4); corners run
# (i, j), (i, j+1), (i+1, j+1), (i+1, j).
_EDGES = ((0, 1), (1, 2), (2, 3), (3, 0))


def _chart_grid(n_circle: int):
    h = 2.0 * math.pi / n_circle
    lo, hi = math.pi / 4.0 - 2.0 * h, 3.0 * math.pi / 4.0 + 2.0 * h
    n_theta = int(math.ceil((hi - lo) / h)) + 1
    theta = np.linspace(lo, hi, n_theta)
    phi = h * np.arange(n_circle)
    return theta, phi


def _arc(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    chord = np.linalg.norm(p - q, axis=-1)
    return 2.0 * np.arcsin(np.clip(chord / 2.0, 0.0, 1.0))


def _owned(p: np.ndarray, q: np.ndarray, chart: str) -> np.ndarray:
    mid = p + q
    z = mid[..., 2] / np.linalg.norm(mid, axis=-1)
    inside = np.abs(z) <= CHART_LIMIT
    return inside if chart == "A" else ~inside


def _chart_length(values: np.ndarray, vectors: np.ndarray, chart: str) -> float:
    """Sum of owned segment lengths for one chart's periodic-in-phi grid."""

    def corners(a):
        right = np.roll(a, -1, axis=1)
        return [a[:-1], right[:-1], right[1:], a[1:]]

    vals = corners(values)
    pts = corners(vectors)
    positive = [v >= 0.0 for v in vals]

    crossings = []
    crossed = []
    for a, b in _EDGES:
        hit = positive[a] != positive[b]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(hit, vals[a] / (vals[a] - vals[b]), 0.0)
        crossings.append((1.0 - t)[..., None] * pts[a] + t[..., None] * pts[b])
        crossed.append(hit)
    crossed = np.stack(crossed)
    n_cross = crossed.sum(axis=0)
    total = 0.0

    # two crossings: one segment between them
    two = n_cross == 2
    if np.any(two):
        idx = np.nonzero(two)
        hits = crossed[:, idx[0], idx[1]]
        first = np.argmax(hits, axis=0)
        second = 3 - np.argmax(hits[::-1], axis=0)
        stacked = np.stack(crossings)[:, idx[0], idx[1]]
        cols = np.arange(first.size)
        p, q = stacked[first, cols], stacked[second, cols]
        keep = _owned(p, q, chart)
        total += float(np.sum(_arc(p[keep], q[keep])))

    # saddle cells: resolve by the sign of the cell centre
    four = n_cross == 4
    if np.any(four):
        idx = np.nonzero(four)
        centre = sum(v[idx] for v in vals) / 4.0
        same = (centre >= 0.0) == positive[0][idx]
        stacked = np.stack(crossings)[:, idx[0], idx[1]]
        pairs_same = ((0, 1), (2, 3))
        pairs_diff = ((3, 0), (1, 2))
        for (a1, b1), (a2, b2) in zip(pairs_same, pairs_diff):
            p = np.where(same[:, None], stacked[a1], stacked[a2])
            q = np.where(same[:, None], stacked[b1], stacked[b2])
            keep = _owned(p, q, chart)
            total += float(np.sum(_arc(p[keep], q[keep])))
    return total


def level_length(
    field: HarmonicField, u: float = 0.0, resolution_factor: Optional[int] = None
) -> float:
    """
    Total length of the level curve {f = u}.

    Marching squares with linear interpolation on both charts, with
    resolution_factor * ell cells per great circle; each segment is counted
    by the chart owning its midpoint. Half of this is the boundary
    Lipschitz-Killing curvature.

    Raises:
        DomainError: If resolution_factor < 8
    """
    res = resolution_factor or settings.HC_NODAL_RESOLUTION
    if res < 8:
        raise DomainError(f"resolution factor must be at least 8, got {res}")
    n_circle = res * field.ell
    theta, phi = _chart_grid(n_circle)
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    vectors_a = unit_vectors(tt, pp)

    total = 0.0
    for chart in ("A", "B"):
        values = synthesize_grid(field.ell, field.chart_coeffs(chart), theta, phi) - u
        vectors = vectors_a if chart == "A" else vectors_a @ ROTATION.T
        total += _chart_length(values, vectors, chart)
    logger.debug("ell=%d u=%g: level length %.6f", field.ell, u, total)
    return total


def excursion_area(
    field: HarmonicField,
    u: float,
    grid: SphereGrid,
    values: Optional[np.ndarray] = None,
) -> float:
    """Area of {f >= u} by quadrature of the indicator."""
    if values is None:
        values = field_on_grid(field, grid)
    return grid.integrate((values >= u).astype(float))
