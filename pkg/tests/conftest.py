import numpy as np
import pytest

from linopkit.executor import executor_from_name


@pytest.fixture(scope="session")
def ref():
    return executor_from_name("reference")


@pytest.fixture(scope="session")
def par():
    return executor_from_name("parallel", 4)


@pytest.fixture
def rng():
    return np.random.default_rng(20260825)
