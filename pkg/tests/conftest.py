import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from windcal import data

settings.register_profile("windcal", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("windcal")


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")
    config.addinivalue_line("markers", "slow: long-running end-to-end test")
    config._criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    # a criterion passes when every test carrying its marker passes
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    key = (marker.args[0], marker.args[1])
    crit = item.config._criteria
    if report.when == "call":
        crit[key] = crit.get(key, True) and report.passed
    elif report.failed or report.skipped:
        crit[key] = False


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    crit = getattr(config, "_criteria", {})
    if not crit:
        return
    terminalreporter.section("acceptance criteria")
    for (num, title), ok in sorted(crit.items()):
        terminalreporter.write_line(f"criterion {num:>2} {title}: {'PASS' if ok else 'FAIL'}")


@pytest.fixture(scope="session")
def small_dataset():
    """Two stations, 20 days: quick enough for rolling fits with short windows."""
    return data.synthetic_generate(data.SyntheticConfig(n_stations=2, n_days=20, seed=11))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
