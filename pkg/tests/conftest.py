import numpy as np
import pytest

from lls_cd.model import SpinSystem


@pytest.fixture
def sys():
    return SpinSystem(delta=90.7, j=3.24)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def random_hermitian(rng, n=4, scale=1.0):
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * (A + A.conj().T) / 2
