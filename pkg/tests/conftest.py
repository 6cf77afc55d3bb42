import numpy as np
import pytest
from hypothesis import settings

from fbmc_preamble.filterbank import design_phydyas
from fbmc_preamble.interference import build_table, full_table

settings.register_profile("default", max_examples=30, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def filt64():
    return design_phydyas(64)


@pytest.fixture(scope="session")
def filt256():
    return design_phydyas(256)


@pytest.fixture(scope="session")
def table64(filt64):
    return full_table(filt64)


@pytest.fixture(scope="session")
def table256(filt256):
    return full_table(filt256)


@pytest.fixture(scope="session")
def small_table256(filt256):
    return build_table(filt256, 1, 3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
