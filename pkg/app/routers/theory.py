"""
Theory routes: closed-form predictions, the jet covariance and densities.
"""

import numpy as np
from fastapi import APIRouter, HTTPException, Query, status

from app.schemas.field import Interval
from app.schemas.theory import DensityPoint, DensityTable, PredictedStats, SigmaResponse
from app.services.sphere_field import sigma_and_cholesky
from app.services.theory import (
    density_p3c,
    density_pi1c,
    integrate_density,
    predicted_moments,
)
from app.utils.errors import DomainError

router = APIRouter(prefix="/theory", tags=["Theory"])


@router.get("/moments/{ell}", response_model=PredictedStats)
def get_moments(ell: int):
    """
    Leading-order moments of the critical point count and the trispectrum proxy.

    **Errors**: `400 Bad Request` for ell < 2
    """
    try:
        return predicted_moments(ell)
    except DomainError as exc:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(exc))


@router.get("/sigma/{ell}", response_model=SigmaResponse)
def get_sigma(ell: int):
    """Covariance of (g1, g2, h11, h12, h22) with its Cholesky factor."""
    try:
        jc = sigma_and_cholesky(ell)
    except DomainError as exc:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(exc))
    return SigmaResponse(
        ell=ell,
        sigma=jc.sigma.tolist(),
        cholesky=jc.cholesky.tolist(),
        taus=list(jc.taus),
    )


@router.get("/densities", response_model=DensityTable)
def get_densities(
    t_min: float = Query(-4.0),
    t_max: float = Query(4.0),
    n: int = Query(81, ge=2, le=2001),
):
    """Tabulated critical-value densities with their integrals."""
    if t_min >= t_max:
        raise HTTPException(
            status_code=status.HTTP_400_BAD_REQUEST, detail="t_min must be below t_max"
        )
    ts = np.linspace(t_min, t_max, n)
    return DensityTable(
        points=[
            DensityPoint(t=float(t), pi1c=float(a), p3c=float(b))
            for t, a, b in zip(ts, density_pi1c(ts), density_p3c(ts))
        ],
        total_pi1c=integrate_density(density_pi1c, Interval()),
        total_p3c=integrate_density(density_p3c, Interval()),
        positive_p3c=integrate_density(density_p3c, Interval(lo=0.0)),
    )
