import numpy as np
import pytest

from deepnmf import kernels


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # Pay the JIT compile once, outside any timed assertion.
    kernels.warmup()


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def nonneg(rng, shape, lo=0.0, hi=1.0):
    return rng.uniform(lo, hi, size=shape)
