import pytest
from hypothesis import HealthCheck, settings

from _models import REGS, case7_model
from twofold.pwl import CANONICAL, build_pwl

settings.register_profile("default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def canonical():
    return build_pwl(CANONICAL)


@pytest.fixture(scope="session")
def case7():
    return case7_model()


@pytest.fixture(scope="session", params=REGS, ids=lambda r: r.family)
def reg(request):
    return request.param


def pytest_terminal_summary(terminalreporter):
    from _acceptance import summary_lines

    lines = summary_lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
