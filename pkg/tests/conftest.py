import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from srbreserve import BridgeParams, ConditionalLaw, GPDPrior, Observation

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def unit_params():
    return BridgeParams(1.0, 1.0)


@pytest.fixture
def gpd_prior():
    """Pareto-type prior on (1, inf) with mean 7/3 and finite variance."""
    return GPDPrior(1.0, 1.0, 0.25)


@pytest.fixture
def anchored_law(unit_params, gpd_prior):
    return ConditionalLaw(gpd_prior, Observation(0.2, 0.5), unit_params)


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


def mc_z(sample, target):
    """Standardised distance between a sample mean and a target value."""
    sample = np.asarray(sample, dtype=float)
    return (sample.mean() - target) / (sample.std(ddof=1) / np.sqrt(sample.size))


def pytest_terminal_summary(terminalreporter):
    from .test_acceptance import CRITERION_LINES

    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(CRITERION_LINES):
            terminalreporter.write_line(CRITERION_LINES[number])
