"""
Shared pytest fixtures for fidelity_agents
"""

import os
import sys
from pathlib import Path

import pytest

# Add project root to path for imports
sys.path.insert(0, str(Path(__file__).parent))

from agents.shared.testing_framework import FidelityTestFramework  # noqa: E402

DATA_DIR_ENV = "FIDELITY_DATA_DIR"


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: property checks over many random models")
    config.addinivalue_line("markers", f"datasets: needs the benchmark CSV files in ${DATA_DIR_ENV}")


@pytest.fixture
def framework(request):
    """Testing framework seeded per test, with its temp directory cleaned up afterwards"""
    fw = FidelityTestFramework(request.node.name, seed=7)
    yield fw
    fw.cleanup_test_environment()


@pytest.fixture
def data_dir():
    """Directory holding the benchmark CSV files; skips when not configured"""
    value = os.environ.get(DATA_DIR_ENV)
    if not value or not Path(value).is_dir():
        pytest.skip(f"{DATA_DIR_ENV} is not set")
    return Path(value)
