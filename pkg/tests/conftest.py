import numpy as np
import pytest

from mwhittaker.rand import RngStream


@pytest.fixture
def rng():
    return RngStream(20240611, 1)


def pytest_configure(config):
    np.seterr(over="ignore", under="ignore")
