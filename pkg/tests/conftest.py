import numpy as np
import pytest

from environment import PayoffProfile, build_topology


@pytest.fixture
def path3():
    return build_topology(3, [(1, 2), (2, 3)])


@pytest.fixture
def triangle():
    return build_topology(3, [(1, 2), (1, 3), (2, 3)])


@pytest.fixture
def cycle4():
    return build_topology(4, [(1, 2), (2, 3), (3, 4), (1, 4)])


@pytest.fixture
def path5():
    return build_topology(5, [(1, 2), (2, 3), (3, 4), (4, 5)])


@pytest.fixture
def middle_penalty():
    """u_i(y) = -y - a_i with node 2 carrying offset 5"""
    return PayoffProfile.quadratic([0.0, 5.0, 0.0])


@pytest.fixture
def spc_profile():
    return PayoffProfile.quadratic([2.0, 2.0, 0.0])


@pytest.fixture
def cycle_profile():
    return PayoffProfile.quadratic([1.0, 0.0, 1.0, 0.0])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
