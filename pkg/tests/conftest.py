import numpy as np
import pytest

from epdwave.fields import CauchyData, GridSpec
from epdwave.propagator import DampingParams

MU_SET = (2.1, 2.5, 2.9)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def params():
    return DampingParams(mu=2.5, p_exponent=2.5, epsilon=1e-3)


@pytest.fixture(params=MU_SET, ids=lambda mu: f"mu={mu}")
def params_each_mu(request):
    return DampingParams(mu=request.param)


@pytest.fixture
def small_grid():
    # T = 3 fits without wrap-around
    return GridSpec.for_final_time(64, 3.0)


@pytest.fixture
def generic_data(small_grid):
    return CauchyData.from_case(small_grid, "generic")
