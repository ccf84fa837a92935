"""
Main FastAPI application.
Read-only lab endpoints for random spherical harmonics and their critical points.
"""

from contextlib import asynccontextmanager

from fastapi import FastAPI

from app.routers import fields, theory, verify
from app.utils.logging_config import configure_logging, get_logger

logger = get_logger("app.main")


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Configure logging on startup."""
    configure_logging()
    logger.info("harmonic critical points lab started")
    yield


app = FastAPI(
    title="Harmonic Critical Points Lab",
    description="""
    Sample random spherical harmonics of degree ell, locate and classify their
    critical points, and compare against closed-form predictions.

    ## Fields
    - `GET /fields/{ell}/{seed}`: coefficients of a seeded field
    - `GET /fields/{ell}/{seed}/jet`: value, gradient and Hessian at a point
    - `GET /fields/{ell}/{seed}/critical-points`: all critical points (rate limited)

    ## Theory
    - `GET /theory/moments/{ell}`, `GET /theory/sigma/{ell}`, `GET /theory/densities`

    ## Verification
    - `GET /verify/{suite}` (rate limited)

    Long experiments run from the command line: `python -m app.cli simulate ...`.
    """,
    version="1.0.0",
    lifespan=lifespan,
    docs_url="/docs",
    redoc_url="/redoc",
)

app.include_router(fields.router)
app.include_router(theory.router)
app.include_router(verify.router)


@app.get("/", tags=["Root"])
async def root():
    """
    Root endpoint with API information and available endpoints.
    """
    return {
        "message": "Harmonic Critical Points Lab",
        "version": "1.0.0",
        "documentation": "/docs",
        "endpoints": {
            "fields": {
                "record": "GET /fields/{ell}/{seed}",
                "jet": "GET /fields/{ell}/{seed}/jet?theta=&phi=",
                "critical_points": "GET /fields/{ell}/{seed}/critical-points",
            },
            "theory": {
                "moments": "GET /theory/moments/{ell}",
                "sigma": "GET /theory/sigma/{ell}",
                "densities": "GET /theory/densities",
            },
            "verification": {"suite": "GET /verify/{suite}"},
        },
    }


@app.get("/health", tags=["Health"])
async def health_check():
    """
    Health check endpoint.
    """
    return {"status": "healthy", "service": "Harmonic Critical Points Lab"}


if __name__ == "__main__":
    import uvicorn

    uvicorn.run("main:app", host="0.0.0.0", port=8000, reload=True)
