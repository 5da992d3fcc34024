import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hierarchy_lab.dynamics import FiniteLiouvillian, FiniteModel
from hierarchy_lab.verification import continuous_model, finite_model

settings.register_profile("default", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def pair_model():
    return finite_model(seed=3, M=2, k_max=2)


@pytest.fixture(scope="session")
def three_body_model():
    return finite_model(seed=5, M=2, k_max=3)


@pytest.fixture(scope="session")
def free_model():
    L = finite_model(seed=3, M=2, k_max=2).liouvillian
    return FiniteModel(L.without_interactions())


@pytest.fixture(scope="session")
def m3_model():
    rng = np.random.default_rng(11)
    return FiniteModel(FiniteLiouvillian.random(3, rng, weights=[0.7, 1.0, 1.4], k_max=2, interaction_scale=0.6))


@pytest.fixture(scope="session")
def harmonic():
    return continuous_model()
