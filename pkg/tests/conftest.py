import cmath
import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from leafspace.catalog import scenario

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def rotated(r: float, theta: float, t: float, n: int) -> np.ndarray:
    """Closed-form rotation flow from polar (r, theta) after group time t."""
    z = r * cmath.exp(2j * math.pi * (theta + t / n))
    return np.array([z.real, z.imag])


def cart(r: float, theta: float) -> np.ndarray:
    return np.array([r * math.cos(2 * math.pi * theta), r * math.sin(2 * math.pi * theta)])


@pytest.fixture(scope="session")
def disc4():
    return scenario("full_disc", 4)


@pytest.fixture(scope="session")
def disc4_line():
    return scenario("full_disc", 4, "line")


@pytest.fixture(scope="session")
def wedge4():
    return scenario("wedge", 4)


@pytest.fixture(scope="session")
def wedge4_line():
    return scenario("wedge", 4, "line")


@pytest.fixture(scope="session")
def ray4():
    return scenario("wedge_plus_ray", 4)


@pytest.fixture(scope="session")
def plane():
    return scenario("translation_plane")


@pytest.fixture(scope="session")
def affine():
    return scenario("affine_line")


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
