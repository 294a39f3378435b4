import pytest
from hypothesis import HealthCheck, settings

from fracerlang.transient import QueueParams

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# acceptance lines collected by test_acceptance.py
ACCEPTANCE_LINES = {}


@pytest.fixture
def canonical():
    """Figure parameters: k=2, lam=4, mu=5, nu=0.75."""
    return QueueParams(4.0, 5.0, 2, 0.75)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
