import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from s1avg.scenarios import get_scenario

settings.register_profile(
    "s1avg", max_examples=25, deadline=None, derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("s1avg")


@pytest.fixture(scope="session")
def harmonic():
    return get_scenario("harmonic")


@pytest.fixture(scope="session")
def quartic():
    return get_scenario("quartic", delta="3/8")


@pytest.fixture(scope="session")
def cylinder():
    return get_scenario("cylinder")


@pytest.fixture(scope="session")
def sphere():
    return get_scenario("sphere")


@pytest.fixture(scope="session")
def hprobes(harmonic):
    return harmonic.probes(12, seed=3)


@pytest.fixture(scope="session")
def qprobes(quartic):
    return quartic.probes(12, seed=3)


def maxabs(a) -> float:
    return float(np.max(np.abs(a)))
