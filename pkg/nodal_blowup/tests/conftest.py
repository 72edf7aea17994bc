import os
import sys

import pytest

# Add the project root to the Python path
project_root = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
sys.path.insert(0, project_root)

from nodal_blowup.core.config import config  # noqa: E402
from nodal_blowup.core.nonlinearity import NonlinearityParams  # noqa: E402
from nodal_blowup.core.shooting import solve_ground, solve_nodal  # noqa: E402

REFERENCE_LAMBDA = 1.0
REFERENCE_EPS = 0.5


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long eps-sweeps, run with -m slow")


@pytest.fixture
def isolated_config(monkeypatch):
    """Config re-read from a clean NBL_* environment, restored afterwards"""
    for key in list(os.environ):
        if key.startswith("NBL_"):
            monkeypatch.delenv(key, raising=False)
    yield config.reload()
    monkeypatch.undo()
    config.reload()


@pytest.fixture(scope="session")
def reference_params():
    return NonlinearityParams(lam=REFERENCE_LAMBDA, eps=REFERENCE_EPS)


@pytest.fixture(scope="session")
def nodal_k1(reference_params):
    return solve_nodal(reference_params, 1)


@pytest.fixture(scope="session")
def nodal_k2(reference_params):
    return solve_nodal(reference_params, 2)


@pytest.fixture(scope="session")
def ground():
    return solve_ground(REFERENCE_LAMBDA)[0]
