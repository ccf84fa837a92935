"""
Verification routes.
"""

from fastapi import APIRouter, Depends, HTTPException, Query, status

from app.dependencies.rate_limit import heavy_limiter
from app.schemas.theory import VerificationReport
from app.services.verification import SUITES, run_suite
from app.utils.errors import LabError

router = APIRouter(prefix="/verify", tags=["Verification"])


@router.get(
    "/{suite}",
    response_model=VerificationReport,
    dependencies=[Depends(heavy_limiter)],
)
def verify_suite(
    suite: str,
    mc_samples: int = Query(100_000, ge=1000, le=10_000_000),
):
    """
    Run one verification suite.

    **Suites**: coeffs, integrals, sigma, densities, fields

    **Errors**:
    - `404 Not Found`: Unknown suite
    - `422 Unprocessable Entity`: A quadrature or geometry step failed
    """
    if suite not in SUITES:
        raise HTTPException(
            status_code=status.HTTP_404_NOT_FOUND,
            detail=f"unknown suite {suite}; choose from {', '.join(SUITES)}",
        )
    try:
        return run_suite(suite, mc_samples=mc_samples)
    except LabError as exc:
        raise HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=str(exc))
