import numpy as np
import pytest

from bandflow.checks import canonical_n1


@pytest.fixture(scope="session")
def canonical():
    """Canonical a=(1,2) system in the centred frame; shared, immutable."""
    return canonical_n1()


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
