import pytest
from hypothesis import HealthCheck, settings

from dttp import make_instance
from dttp.harness import InstanceSpec, generate_instance

settings.register_profile("dttp", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("dttp")


@pytest.fixture
def triangle():
    """Three cities at (0,0), (0,4), (3,0) holding one item (p=100, w=10) at the second city."""
    return make_instance([(0, 0), (0, 4), (3, 0)], [100], [10], [1], 10)


@pytest.fixture(scope="session")
def berlin_a():
    return generate_instance(InstanceSpec("berlin52", "A", seed=0))


@pytest.fixture(scope="session")
def berlin_b():
    return generate_instance(InstanceSpec("berlin52", "B", seed=0))
