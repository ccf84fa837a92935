"""
Critical point service layer.
Locate, refine, classify and count the critical points of a sampled field.
"""

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np
from scipy.spatial import cKDTree

from app.config import settings
from app.schemas.field import (
    CriticalKind,
    CriticalPoint,
    CritSummary,
    Interval,
    SpherePoint,
)
from app.services.sphere_field import (
    CHART_LIMIT,
    HarmonicField,
    chart_jets_grid,
    chart_jets_points,
    from_chart_b,
    unit_vectors,
)
from app.utils.errors import DegenerateCritical, DomainError, IncompleteMorse
from app.utils.logging_config import get_logger

logger = get_logger(__name__)

KIND_MIN, KIND_SADDLE, KIND_MAX = -1, 0, 1
_KIND_NAMES = {
    KIND_MIN: CriticalKind.MINIMUM,
    KIND_SADDLE: CriticalKind.SADDLE,
    KIND_MAX: CriticalKind.MAXIMUM,
}
# Newton iterates leaving this colatitude band are dropped
_THETA_GUARD = math.pi / 8.0


@dataclass(frozen=True)
class CriticalPointArrays:
    """Refined critical points as parallel arrays, sorted by (theta, phi)."""

    theta: np.ndarray
    phi: np.ndarray
    value: np.ndarray
    kind: np.ndarray
    residual: np.ndarray
    hess_det: np.ndarray

    def __len__(self) -> int:
        return int(self.theta.size)

    def to_points(self) -> List[CriticalPoint]:
        return [
            CriticalPoint(
                point=SpherePoint(theta=float(t), phi=float(p)),
                value=float(v),
                kind=_KIND_NAMES[int(k)],
                residual=float(r),
                hess_det=float(d),
            )
            for t, p, v, k, r, d in zip(
                self.theta, self.phi, self.value, self.kind, self.residual, self.hess_det
            )
        ]


def chart_band(ell: int, grid_factor: int):
    """Seed grid of one chart: colatitudes around [pi/4, 3pi/4] and full longitudes."""
    h = math.pi / (grid_factor * ell)
    lo, hi = math.pi / 4.0 - 2.0 * h, 3.0 * math.pi / 4.0 + 2.0 * h
    n_theta = int(math.ceil((hi - lo) / h)) + 1
    theta = np.linspace(lo, hi, n_theta)
    n_phi = 2 * grid_factor * ell
    phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    return theta, phi, h


def _newton_step(jets: np.ndarray, max_step: float):
    g1, g2, h11, h12, h22 = jets[1], jets[2], jets[3], jets[4], jets[5]
    det = h11 * h22 - h12 * h12
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = (h12 * g2 - h22 * g1) / det
        d2 = (h12 * g1 - h11 * g2) / det
    norm = np.hypot(d1, d2)
    scale = np.where(norm > max_step, max_step / np.where(norm > 0, norm, 1.0), 1.0)
    return d1 * scale, d2 * scale, norm


def _seed_points(ell: int, coeffs: np.ndarray, grid_factor: int):
    """
    Seeds from the chart grid: centres of cells where both gradient
    components change sign, plus Newton predictions from nodes whose
    predicted step is shorter than one cell.
    """
    theta, phi, h = chart_band(ell, grid_factor)
    jets = chart_jets_grid(ell, coeffs, theta, phi)
    g1, g2 = jets["g1"], jets["g2"]

    def corners(a):
        right = np.roll(a, -1, axis=1)
        return np.stack([a[:-1], right[:-1], right[1:], a[1:]])

    c1, c2 = corners(g1), corners(g2)
    crossing = (c1.min(axis=0) <= 0) & (c1.max(axis=0) >= 0)
    crossing &= (c2.min(axis=0) <= 0) & (c2.max(axis=0) >= 0)
    dphi = phi[1] - phi[0] if phi.size > 1 else 2.0 * math.pi
    ii, jj = np.nonzero(crossing)
    seed_theta = [theta[ii] + 0.5 * h]
    seed_phi = [phi[jj] + 0.5 * dphi]

    stacked = np.stack([jets[k].ravel() for k in ("f", "g1", "g2", "h11", "h12", "h22")])
    d1, d2, norm = _newton_step(stacked, np.inf)
    close = np.isfinite(norm) & (norm <= h)
    tt = np.broadcast_to(theta[:, None], g1.shape).ravel()
    pp = np.broadcast_to(phi[None, :], g1.shape).ravel()
    seed_theta.append(tt[close] + d1[close])
    seed_phi.append(pp[close] + d2[close] / np.sin(tt[close]))

    logger.debug(
        "ell=%d: %d crossing cells, %d predicted seeds", ell, ii.size, int(close.sum())
    )
    return np.concatenate(seed_theta), np.concatenate(seed_phi)


def _refine(ell: int, coeffs: np.ndarray, theta: np.ndarray, phi: np.ndarray):
    """Vectorized Newton on the covariant gradient; returns converged jets."""
    lam = ell * (ell + 1.0)
    tol = settings.HC_NEWTON_TOL * lam
    max_step = 1.0 / ell
    theta = theta.copy()
    phi = phi.copy()
    active = np.ones(theta.size, dtype=bool)
    done = np.zeros(theta.size, dtype=bool)
    iterations = 0

    for _ in range(settings.HC_NEWTON_MAX_ITER + 1):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        jets = chart_jets_points(ell, coeffs, theta[idx], phi[idx])
        residual = np.hypot(jets[1], jets[2])
        conv = residual <= tol
        done[idx[conv]] = True
        active[idx[conv]] = False

        move = idx[~conv]
        if move.size == 0 or iterations == settings.HC_NEWTON_MAX_ITER:
            break
        d1, d2, _ = _newton_step(jets[:, ~conv], max_step)
        sin_theta = np.sin(theta[move])
        theta[move] += d1
        phi[move] += d2 / sin_theta
        lost = (
            ~np.isfinite(theta[move])
            | ~np.isfinite(phi[move])
            | (theta[move] < _THETA_GUARD)
            | (theta[move] > math.pi - _THETA_GUARD)
        )
        active[move[lost]] = False
        iterations += 1

    keep = np.nonzero(done)[0]
    theta, phi = theta[keep], np.mod(phi[keep], 2.0 * math.pi)
    jets = chart_jets_points(ell, coeffs, theta, phi)
    logger.debug(
        "ell=%d: %d of %d seeds converged after %d iterations",
        ell,
        keep.size,
        done.size,
        iterations,
    )
    return theta, phi, jets


def _chart_candidates(field: HarmonicField, chart: str, grid_factor: int):
    coeffs = field.chart_coeffs(chart)
    seeds_t, seeds_p = _seed_points(field.ell, coeffs, grid_factor)
    theta, phi, jets = _refine(field.ell, coeffs, seeds_t, seeds_p)
    if chart == "B":
        theta, phi = from_chart_b(theta, phi)
        owned = np.abs(np.cos(theta)) > CHART_LIMIT
    else:
        owned = np.abs(np.cos(theta)) <= CHART_LIMIT
    return theta[owned], phi[owned], jets[:, owned]


def _deduplicate(theta, phi, value, kind, residual, radius, value_tol):
    """
    Greedy pass in order of increasing residual; merges converged copies of
    one root. Two points are the same root only when they lie within radius,
    share a Morse index and agree in value to value_tol.
    """
    order = np.lexsort((phi, theta, residual))
    vectors = unit_vectors(theta, phi)
    tree = cKDTree(vectors)
    chord = 2.0 * math.sin(radius / 2.0)
    removed = np.zeros(theta.size, dtype=bool)
    kept = []
    for i in order:
        if removed[i]:
            continue
        kept.append(i)
        for j in tree.query_ball_point(vectors[i], chord):
            if kind[j] == kind[i] and abs(value[j] - value[i]) <= value_tol:
                removed[j] = True
    return np.array(sorted(kept), dtype=int)


def locate_critical_points(
    field: HarmonicField, grid_factor: Optional[int] = None
) -> CriticalPointArrays:
    """
    Find every critical point of a field.

    Args:
        field: Sampled field
        grid_factor: Seed-grid multiplier kappa; kappa * ell >= 16

    Returns:
        CriticalPointArrays sorted by (theta, phi)

    Raises:
        DomainError: If kappa * ell < 16
        DegenerateCritical: If a refined point has |det Hessian| < tol lam^2
        IncompleteMorse: If n_min - n_saddle + n_max != 2
    """
    kappa = grid_factor or settings.HC_GRID_FACTOR
    ell = field.ell
    if kappa * ell < 16:
        raise DomainError(f"grid factor {kappa} too small for ell={ell}")

    parts = [_chart_candidates(field, chart, kappa) for chart in ("A", "B")]
    theta = np.concatenate([p[0] for p in parts])
    phi = np.concatenate([p[1] for p in parts])
    jets = np.concatenate([p[2] for p in parts], axis=1)
    residual = np.hypot(jets[1], jets[2])
    det = jets[3] * jets[5] - jets[4] ** 2
    trace = jets[3] + jets[5]
    kind = np.where(det < 0, KIND_SADDLE, np.where(trace < 0, KIND_MAX, KIND_MIN))

    keep = _deduplicate(
        theta,
        phi,
        jets[0],
        kind,
        residual,
        settings.HC_DEDUP_RADIUS / ell,
        settings.HC_DEDUP_VALUE_TOL,
    )
    theta, phi, jets, residual = theta[keep], phi[keep], jets[:, keep], residual[keep]
    det, kind = det[keep], kind[keep]

    lam = field.lam
    degenerate = np.abs(det) < settings.HC_DEGENERATE_TOL * lam * lam
    if np.any(degenerate):
        i = int(np.argmax(degenerate))
        raise DegenerateCritical(float(theta[i]), float(phi[i]), float(det[i]))

    n_min = int(np.sum(kind == KIND_MIN))
    n_saddle = int(np.sum(kind == KIND_SADDLE))
    n_max = int(np.sum(kind == KIND_MAX))
    if n_min - n_saddle + n_max != 2:
        raise IncompleteMorse(n_min, n_saddle, n_max, kappa)

    order = np.lexsort((phi, theta))
    logger.debug(
        "ell=%d seed=%d: %d minima, %d saddles, %d maxima",
        ell,
        field.seed,
        n_min,
        n_saddle,
        n_max,
    )
    return CriticalPointArrays(
        theta=theta[order],
        phi=phi[order],
        value=jets[0][order],
        kind=kind[order],
        residual=residual[order],
        hess_det=det[order],
    )


def find_critical_points(
    field: HarmonicField, grid_factor: Optional[int] = None
) -> List[CriticalPoint]:
    """Critical points of a field as records; see locate_critical_points."""
    return locate_critical_points(field, grid_factor).to_points()


def _values_and_kinds(points):
    if isinstance(points, CriticalPointArrays):
        return points.value, points.kind
    values = np.array([p.value for p in points], dtype=float)
    codes = {v: k for k, v in _KIND_NAMES.items()}
    kinds = np.array([codes[p.kind] for p in points], dtype=int)
    return values, kinds


def count_in_interval(
    points: Union[Sequence[CriticalPoint], CriticalPointArrays], interval: Interval
) -> int:
    """Number of critical points with value in the interval."""
    values, _ = _values_and_kinds(points)
    return int(np.sum((values >= interval.lower) & (values <= interval.upper)))


def _morse_counts(kinds: np.ndarray):
    n_min = int(np.sum(kinds == KIND_MIN))
    n_saddle = int(np.sum(kinds == KIND_SADDLE))
    n_max = int(np.sum(kinds == KIND_MAX))
    if n_min - n_saddle + n_max != 2:
        raise IncompleteMorse(n_min, n_saddle, n_max, 0)
    return n_min, n_saddle, n_max


def euler_characteristic(
    points: Union[Sequence[CriticalPoint], CriticalPointArrays], u: float
) -> int:
    """
    Euler characteristic of the excursion set {f >= u} by Morse counting:
    maxima - saddles + minima among critical points with value >= u.

    Raises:
        IncompleteMorse: If the point list fails the Morse relation
    """
    values, kinds = _values_and_kinds(points)
    _morse_counts(kinds)
    above = values >= u
    return int(
        np.sum(above & (kinds == KIND_MAX))
        - np.sum(above & (kinds == KIND_SADDLE))
        + np.sum(above & (kinds == KIND_MIN))
    )


def crit_summary(
    points: Union[Sequence[CriticalPoint], CriticalPointArrays],
    intervals: Iterable[Interval] = (),
) -> CritSummary:
    """
    Counts by type and per interval.

    Raises:
        IncompleteMorse: If the point list fails the Morse relation
    """
    _, kinds = _values_and_kinds(points)
    n_min, n_saddle, n_max = _morse_counts(kinds)
    return CritSummary(
        n_min=n_min,
        n_saddle=n_saddle,
        n_max=n_max,
        interval_counts=[count_in_interval(points, iv) for iv in intervals],
    )


CSV_COLUMNS = ["theta", "phi", "value", "kind", "residual"]


def critical_points_to_csv(
    points: Sequence[CriticalPoint], path: Union[str, Path, None] = None, stream=None
) -> None:
    """Write points as CSV (theta,phi,value,kind,residual) to a path or stream."""
    handle = open(path, "w", newline="") if path is not None else stream
    try:
        writer = csv.writer(handle)
        writer.writerow(CSV_COLUMNS)
        for p in points:
            writer.writerow(
                [repr(p.point.theta), repr(p.point.phi), repr(p.value), p.kind.value, repr(p.residual)]
            )
    finally:
        if path is not None:
            handle.close()
