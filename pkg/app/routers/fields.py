"""
Field routes: sampled coefficients, jets and critical points.
"""

from typing import Optional

from fastapi import APIRouter, Depends, HTTPException, Query, status

from app.dependencies.rate_limit import heavy_limiter
from app.schemas.field import (
    CriticalPointsResponse,
    FieldRecord,
    Interval,
    JetResponse,
    SpherePoint,
)
from app.services.critical_points import crit_summary, locate_critical_points
from app.services.sphere_field import eval_jet, field_to_record, sample_field
from app.utils.errors import DegenerateCritical, IncompleteMorse, LabError

router = APIRouter(prefix="/fields", tags=["Fields"])

MAX_ELL = 2000
MAX_CRIT_ELL = 200


def _field(ell: int, seed: int):
    if ell > MAX_ELL:
        raise HTTPException(
            status_code=status.HTTP_400_BAD_REQUEST,
            detail=f"ell must not exceed {MAX_ELL}",
        )
    try:
        return sample_field(ell, seed)
    except ValueError as exc:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(exc))


@router.get("/{ell}/{seed}", response_model=FieldRecord)
def get_field(ell: int, seed: int):
    """
    Coefficients of the field sampled from (ell, seed).

    **Returns**: The 2 ell + 1 real coefficients; the same pair always
    returns the same field.
    """
    return field_to_record(_field(ell, seed))


@router.get("/{ell}/{seed}/jet", response_model=JetResponse)
def get_jet(
    ell: int,
    seed: int,
    theta: float = Query(..., ge=0.0, le=3.141592653589793),
    phi: float = Query(0.0),
):
    """
    Value, covariant gradient and covariant Hessian at one point.

    **Returns**: The jet and |h11 + h22 + lam f|, which vanishes up to roundoff.
    """
    field = _field(ell, seed)
    point = SpherePoint(theta=theta, phi=phi)
    jet = eval_jet(field, point)
    lam = ell * (ell + 1)
    return JetResponse(
        ell=ell,
        seed=seed,
        point=point,
        jet=jet,
        trace_residual=abs(jet.h11 + jet.h22 + lam * jet.f),
    )


@router.get(
    "/{ell}/{seed}/critical-points",
    response_model=CriticalPointsResponse,
    dependencies=[Depends(heavy_limiter)],
)
def get_critical_points(
    ell: int,
    seed: int,
    grid_factor: Optional[int] = Query(None, ge=1),
    lo: Optional[float] = Query(None, description="Optional value interval lower bound"),
    hi: Optional[float] = Query(None, description="Optional value interval upper bound"),
):
    """
    Every critical point of the field with counts by type.

    **Rate limited**: 10 requests per minute per client.

    **Errors**:
    - `400 Bad Request`: ell out of range or invalid interval
    - `422 Unprocessable Entity`: the search failed the Morse check or hit a
      degenerate point
    """
    if ell > MAX_CRIT_ELL:
        raise HTTPException(
            status_code=status.HTTP_400_BAD_REQUEST,
            detail=f"critical point search is limited to ell <= {MAX_CRIT_ELL}",
        )
    field = _field(ell, seed)
    try:
        intervals = [Interval(lo=lo, hi=hi)] if lo is not None or hi is not None else []
        arrays = locate_critical_points(field, grid_factor)
    except (IncompleteMorse, DegenerateCritical) as exc:
        raise HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=str(exc))
    except (LabError, ValueError) as exc:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(exc))
    return CriticalPointsResponse(
        ell=ell,
        seed=seed,
        summary=crit_summary(arrays, intervals),
        points=arrays.to_points(),
    )
