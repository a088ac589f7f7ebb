import numpy as np
import pytest

from histml.conflict import ConflictModel
from histml.scenario import load_scenario


@pytest.fixture(scope="session")
def colonial():
    return load_scenario("colonial_1890")


@pytest.fixture(scope="session")
def punic():
    return load_scenario("punic_218bce")


@pytest.fixture(scope="session")
def punic_model(punic):
    return ConflictModel.from_scenario(punic)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
