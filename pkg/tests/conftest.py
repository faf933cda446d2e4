import numpy as np
import pytest

from tokenmark import _fastkeys


@pytest.fixture(scope="session", autouse=True)
def jit_warmup():
    """Compile (or load cached) kernels once so timings elsewhere are clean."""
    _fastkeys.warmup()


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(20240101))
