import numpy as np
import pytest

from qsolidtorus.families import CoefficientFamily, WeightFamily, default_families


@pytest.fixture(scope="session")
def families():
    return default_families()


@pytest.fixture(scope="session")
def unit_coeffs():
    return CoefficientFamily(kind="unit", kappa=1.0)


@pytest.fixture()
def rng():
    return np.random.default_rng(20250808)
