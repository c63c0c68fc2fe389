import numpy as np
import pytest

from reachtrack.kinematics import default_chain, desk_chain


@pytest.fixture(scope="session")
def chain():
    """Identity-base chain for frame-level unit tests."""
    return default_chain()


@pytest.fixture(scope="session")
def mounted_chain():
    """Desk-mounted chain used by scenario-level tests."""
    return desk_chain()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
