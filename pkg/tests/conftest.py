import numpy as np
import pytest

from famsim.cli import bundled_path
from famsim.config import load_model


@pytest.fixture(scope="session")
def model_and_ctrl():
    return load_model(bundled_path("model"))


@pytest.fixture(scope="session")
def model(model_and_ctrl):
    return model_and_ctrl[0]


@pytest.fixture(scope="session")
def ctrl(model_and_ctrl):
    return model_and_ctrl[1]


@pytest.fixture(scope="session")
def flatquad():
    return load_model(bundled_path("model_flatquad"))[0]


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
