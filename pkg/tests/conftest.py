import pytest
from hypothesis import settings

from trackscope.synthetic import benchmark_spec, default_spec, four_lane_spec, generate_synthetic_dataset

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


@pytest.fixture(scope="session")
def two_lane_triple():
    return generate_synthetic_dataset(default_spec(3), seed=11)


@pytest.fixture(scope="session")
def four_lane_triple():
    return generate_synthetic_dataset(four_lane_spec(3), seed=11)


@pytest.fixture(scope="session")
def month():
    return generate_synthetic_dataset(default_spec(28, anomaly_days=(7, 20)), seed=42)


@pytest.fixture(scope="session")
def benchmark():
    return generate_synthetic_dataset(benchmark_spec(), seed=2012)


_ACCEPTANCE: list[tuple[str, str, float]] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(name): headline acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        _ACCEPTANCE.append((marker.args[0], "PASS" if rep.passed else "FAIL", rep.duration))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, status, secs in _ACCEPTANCE:
        terminalreporter.write_line(f"{status}  {name}  ({secs:.2f}s)")
