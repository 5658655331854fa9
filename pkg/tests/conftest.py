import os
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from pibf.homomorphic import keygen
from pibf.ibf import make_params

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=300, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    num, title = mark.args
    if rep.when == "setup" and rep.passed:
        return
    state = "FAIL" if rep.failed else "SKIP" if rep.skipped else "PASS"
    if _CRITERIA.get(num, ("PASS",))[0] != "FAIL":
        _CRITERIA[num] = (state, title)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        state, title = _CRITERIA[num]
        terminalreporter.write_line(f"criterion {num:2d} {state}: {title}")


@pytest.fixture(scope="session")
def test_keys():
    return keygen(512, insecure_test=True)


@pytest.fixture
def params():
    return make_params(10, 0.01, hash_seed=bytes(range(16)))


@pytest.fixture(scope="session")
def golden_dir():
    return Path(__file__).parent / "golden"
