import os

# Two physical cores on the CI box: the inner kernels already keep them busy,
# so the deterministic single-worker path is the fastest default for tests.
# (dolhodge itself pins the BLAS pools; importing it before numpy keeps the
# pinning effective for the whole test process.)
os.environ.setdefault("DOLHODGE_THREADS", "1")

import dolhodge  # noqa: F401  (BLAS pinning side effect)
import numpy as np
import pytest

from dolhodge.family import FamilySpec


@pytest.fixture(scope="session")
def spec16():
    return FamilySpec.create(tau=1j, degree=2, twist=[np.pi], rescale=[[0.3]], n_side=16)


@pytest.fixture(scope="session")
def spec32():
    return FamilySpec.create(tau=1j, degree=2, twist=[np.pi], rescale=[[0.3]], n_side=32)


@pytest.fixture()
def rng():
    return np.random.default_rng(0x5EED)


def random_field(rng, n):
    return rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))


def smooth_field(rng, n, modes=3):
    """Band-limited random field (spectrally resolved)."""
    coef = np.zeros((n, n), dtype=complex)
    for _ in range(8):
        m = rng.integers(-modes, modes + 1)
        k = rng.integers(-modes, modes + 1)
        amp = rng.standard_normal() + 1j * rng.standard_normal()
        j = np.arange(n)
        coef += amp * np.outer(np.exp(2j * np.pi * m * j / n),
                               np.exp(2j * np.pi * k * j / n))
    return coef
