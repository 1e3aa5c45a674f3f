import numpy as np
import pytest

from polydil import generators


def random_complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_unitary(rng, d):
    q, r = np.linalg.qr(random_complex(rng, d, d))
    return q * (np.diag(r) / np.abs(np.diag(r)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture(scope="session")
def jordan22():
    return generators.jordan_pair(2, 2, 0.9, 0.9)


@pytest.fixture(scope="session")
def triple22(jordan22):
    return generators.product_triple(jordan22, 1, 1)


@pytest.fixture(scope="session")
def triple32():
    pair = generators.jordan_pair(3, 2, 1.0, 1.0)
    return generators.product_triple(pair, 2, 1)
