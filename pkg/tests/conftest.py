from os.path import dirname, join

import numpy as np
import pytest

from shimcp.datagen import philox
from shimcp.patterns import CovariateMatrix

DATA = join(dirname(__file__), 'data')


def binary_instance(seed, n=20, m=5, zeta=0.5, sigma=1.0):
    """n labeled binary rows plus a test row, response from a small planted model."""
    rng = philox(seed)
    Z = (rng.random((n + 1, m)) < 1 - zeta).astype(float)
    y = 2.0 * Z[:n, 0] + 2.0 * Z[:n, 0] * Z[:n, 1] + rng.normal(0.0, sigma, n)
    return CovariateMatrix(Z), y


def continuous_instance(seed, n=15, m=4):
    """Covariates uniform on [0, 1]; interaction columns are then never collinear."""
    rng = philox(seed)
    Z = rng.random((n + 1, m))
    y = 3.0 * Z[:n, 0] * Z[:n, 1] - 2.0 * Z[:n, 2] + rng.normal(0.0, 0.5, n)
    return CovariateMatrix(Z), y


@pytest.fixture
def rng():
    return philox(12345)


@pytest.fixture
def compas_csv():
    return join(DATA, 'compas_sample.csv')


@pytest.fixture
def compas_schema():
    return join(DATA, 'compas_schema.json')


@pytest.fixture
def smooth():
    return continuous_instance(3)


@pytest.fixture
def sparse():
    return binary_instance(7)


def dense(Z, patterns):
    values = np.asarray(getattr(Z, 'values', Z))
    return np.column_stack([np.prod(values[:, [i - 1 for i in p.items]], axis=1) for p in patterns])
