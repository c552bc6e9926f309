import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def bloch_vector(rho):
    """Independent helper: r_i = tr(ρ σ_i) for a qubit state."""
    sx = np.array([[0, 1], [1, 0]])
    sy = np.array([[0, -1j], [1j, 0]])
    sz = np.diag([1, -1])
    r = np.asarray(rho)
    return np.real([np.trace(r @ s) for s in (sx, sy, sz)])
