"""Pytest configuration and shared fixtures."""

import math
import os
import tempfile
from pathlib import Path

import pytest

from plapbranch.core.config import ENV_PREFIX, ToolkitConfig
from plapbranch.models.domain import DomainSpec
from plapbranch.models.options import SolveOptions
from plapbranch.numerics.mesh import build_mesh


@pytest.fixture
def temp_dir():
    """Create a temporary directory for tests."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield Path(tmpdir)


@pytest.fixture
def clean_environment():
    """Remove PLAPBRANCH_* variables for the duration of a test."""
    original_env = os.environ.copy()
    for name in ToolkitConfig.model_fields:
        os.environ.pop(ENV_PREFIX + name.upper(), None)

    yield

    os.environ.clear()
    os.environ.update(original_env)


@pytest.fixture
def mock_config(clean_environment):
    """Configuration read from a patched environment."""
    os.environ[ENV_PREFIX + "N"] = "16"
    os.environ[ENV_PREFIX + "LOG_LEVEL"] = "DEBUG"
    from plapbranch.core.config import get_config

    yield get_config()


@pytest.fixture
def fast_options():
    """Solver settings loose enough for n <= 32 unit tests."""
    return SolveOptions(max_iters=20_000, tol_lambda=1e-11, tol_grad=1e-9)


@pytest.fixture
def unit_square():
    return DomainSpec.rectangle(1.0, 1.0)


@pytest.fixture
def square_mesh_16(unit_square):
    return build_mesh(unit_square, 16)


@pytest.fixture
def square_mesh_32(unit_square):
    return build_mesh(unit_square, 32)


@pytest.fixture
def triangle_mesh_16():
    return build_mesh(DomainSpec.triangle(), 16)


@pytest.fixture
def pi_sq():
    return math.pi**2
