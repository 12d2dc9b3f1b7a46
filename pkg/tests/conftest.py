import numpy as np
import pytest
from hypothesis import HealthCheck, settings

# network training inside property tests can be slow; data-dependent
# deadlines are more trouble than they are worth here
settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
