import numpy as np
import pytest

from quadheat import QuadricForm, decompose_form, heisenberg


@pytest.fixture(scope="session")
def heis_q():
    return heisenberg(1)


@pytest.fixture(scope="session")
def heis_spectral(heis_q):
    return decompose_form(heis_q, [1.0])


@pytest.fixture()
def rng():
    return np.random.default_rng(20240809)


def random_hermitian_quadric(rng, n, m, scale=1.0):
    mats = []
    for _ in range(m):
        X = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        mats.append(scale * 0.5 * (X + X.conj().T))
    return QuadricForm(n, m, mats)
