import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "graphonsim",
    derandomize=True,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("graphonsim")


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
