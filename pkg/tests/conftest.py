import pytest
from hypothesis import HealthCheck, settings

from peh_impedance.model import PehSystem
from peh_impedance.presets import load_preset

settings.register_profile("default", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def strong():
    return load_preset("strong")


@pytest.fixture(scope="session")
def weak():
    return load_preset("weak")


@pytest.fixture
def unit_system():
    return PehSystem(M=1.0, K=1.0, D=0.1, alpha=1.0, Cp=1.0, force=1.0)


# one summary line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
