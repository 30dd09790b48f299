import numpy as np
import pytest

from lqrlimits.verify import burned_in_setup, random_stable_instance, scalar_system

__all__ = ["burned_in_setup", "random_stable_instance", "scalar_system"]


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def scalar_09():
    """The workhorse scalar instance a = 0.9, b = 1, q = r = sigma_w^2 = 1."""
    return scalar_system(0.9, 1.0)
