import pytest
from hypothesis import HealthCheck, settings

from pulseforge import ModelParams, TimeGrid, family_gauss_cos, synthesize

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def gauss0():
    return synthesize(family_gauss_cos(0.0), ModelParams(), TimeGrid.uniform(-6.0, 6.0, 1e-2))
