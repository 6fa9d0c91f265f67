import numpy as np
import pytest


@pytest.fixture
def rng():
    """Fixed-seed generator for randomized test-case construction."""
    return np.random.default_rng(20240817)
