import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def random_traceless(rng, scale=1.0):
    """Random complex 3x3 traceless matrix."""
    M = scale * (rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)))
    return M - (np.trace(M) / 3.0) * np.eye(3)
