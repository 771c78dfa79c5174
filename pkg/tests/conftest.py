import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dualcurv import Ball, BodyIndicator, LogConcaveFunction, Polytope, Quadratic, ScaledNorm

settings.register_profile(
    "repo", deadline=None, max_examples=25, derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("repo")


@pytest.fixture
def square():
    return Polytope.box([1.0, 1.0])


@pytest.fixture
def gaussian():
    return LogConcaveFunction(Quadratic(1.0))


@pytest.fixture
def exp_norm():
    return LogConcaveFunction(ScaledNorm(1.0))


@pytest.fixture
def ball2_indicator():
    return LogConcaveFunction(BodyIndicator(Ball(2.0)))


@pytest.fixture
def rng():
    return np.random.default_rng(0)


ACCEPTANCE_LINES = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_lines(request):
    """Pass/fail lines collected by the acceptance tests, echoed in the terminal summary."""
    return request.config.stash.setdefault(ACCEPTANCE_LINES, [])


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("]")[1].split()[0])):
            terminalreporter.write_line(line)
