"""
Pytest fixtures for testing.
"""

import os

import pytest
from fastapi.testclient import TestClient

# Keep Monte Carlo chunks small so chunking is exercised
os.environ.setdefault("HC_MC_CHUNK", "50000")

from app.dependencies.rate_limit import heavy_limiter
from app.schemas.experiment import ExperimentConfig
from app.services.sphere_field import sample_field
from app.utils.logging_config import configure_logging
from main import app

# Bind the log handler to the real stderr before any CliRunner swaps streams
configure_logging()


@pytest.fixture(scope="function")
def client():
    """
    Test client with a fresh rate-limit window.
    """
    heavy_limiter.reset()
    with TestClient(app, raise_server_exceptions=True) as test_client:
        yield test_client
    heavy_limiter.reset()


@pytest.fixture(scope="session")
def field_l2():
    """Degree-2 field: a traceless quadratic form restricted to the sphere."""
    return sample_field(2, 7)


@pytest.fixture(scope="session")
def field_l10():
    return sample_field(10, 12345)


@pytest.fixture(scope="session")
def field_l25():
    return sample_field(25, 2024)


@pytest.fixture
def small_config(tmp_path):
    """Two degrees, three replicates, every statistic."""
    return ExperimentConfig(
        ells=[2, 5],
        replicates=3,
        master_seed=11,
        grid_factor=8,
        intervals=[{"lo": 1.0}, {"lo": -0.5, "hi": 0.5}],
        thresholds=[0.0, 1.0],
        out=str(tmp_path / "run"),
    )
