import numpy as np
import pytest

from bowen_dim.systems import HorseshoeParams, build_example1, build_example2, build_ifs, generic_tau


@pytest.fixture(scope="session")
def cantor():
    return build_ifs([1 / 3, 1 / 3], [0.0, 2 / 3])


@pytest.fixture(scope="session")
def example2():
    return build_example2(0.1)


@pytest.fixture(scope="session")
def example1():
    return build_example1(HorseshoeParams.conformal(3, generic_tau(3)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
