from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from scatshift.basis import BasisFunction

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def tp2():
    """Univariate truncated power with kappa = 2."""
    return BasisFunction.truncated_power(2)


@pytest.fixture(scope="session")
def thin_plate():
    return BasisFunction.thin_plate()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
