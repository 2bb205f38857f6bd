import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=200,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_ACCEPTANCE: dict[int, tuple[bool, str]] = {}


class Criterion:
    """Records one acceptance line; the test then asserts on the same outcome."""

    def __init__(self, number: int, title: str):
        self.number, self.title = number, title

    def report(self, passed: bool, detail: str) -> None:
        _ACCEPTANCE[self.number] = (bool(passed), f"{self.title}: {detail}")
        print(f"\nACCEPTANCE {self.number:2d} {'PASS' if passed else 'FAIL'}  {self.title}: {detail}")
        assert passed, detail


@pytest.fixture
def criterion(request):
    marker = request.node.get_closest_marker("criterion")
    return Criterion(*marker.args)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        ok, line = _ACCEPTANCE[n]
        terminalreporter.write_line(f"{n:2d} {'PASS' if ok else 'FAIL'}  {line}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
