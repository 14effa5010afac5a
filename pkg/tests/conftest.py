import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from wtbound.arrivals import burst, train
from wtbound.bounds import Scenario
from wtbound.channel import RayleighChannel

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def ch5():
    return RayleighChannel.from_db(5.0)


@pytest.fixture(scope="session")
def ch10():
    return RayleighChannel.from_db(10.0)


@pytest.fixture
def two_hop(ch5):
    return Scenario(ch5, (50.0, 50.0), train(25, 5), 5, 10)


@pytest.fixture
def single_burst(ch5):
    return Scenario(ch5, (0.0,), burst(25), 1, 3)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
