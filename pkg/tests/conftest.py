import numpy as np
import pytest

from gradhyd.models import Hmodel, Hymod
from gradhyd.synthetic import SyntheticSpec, generate_synthetic


@pytest.fixture(scope="session")
def hymod_data():
    return generate_synthetic(SyntheticSpec(seed=1), Hymod())


@pytest.fixture(scope="session")
def hmodel_data():
    return generate_synthetic(SyntheticSpec(seed=1), Hmodel())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
