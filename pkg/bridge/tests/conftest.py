"""Bridge test wiring: a live server fixture plus its own summary section.

The server is a real uvicorn instance in a daemon thread, so every test
exercises the actual HTTP stack rather than an in-process shim.
"""

import pytest

from bridge_util import start_server, stop_server
from sdbridge.conformance import build_reference_session
from sdbridge.demo_assets import ensure_demo_adapters


@pytest.fixture(scope="session")
def bridge(tmp_path_factory):
    adapter_dir = tmp_path_factory.mktemp("adapters")
    ensure_demo_adapters(adapter_dir)
    handle = start_server(build_reference_session(str(adapter_dir)))
    yield handle
    stop_server(handle)


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "criterion(name, title): tag a test as one acceptance criterion")
    config._bridge_criterion_results = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    name = marker.args[0]
    title = marker.args[1] if len(marker.args) > 1 else ""
    results = item.config._bridge_criterion_results
    if report.when == "call":
        results[name] = (report.outcome == "passed", title)
    elif report.when == "setup" and report.outcome != "passed":
        results[name] = (False, title)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = getattr(config, "_bridge_criterion_results", {})
    if results:
        terminalreporter.section("bridge criteria")
        for name in sorted(results):
            passed, title = results[name]
            status = "PASS" if passed else "FAIL"
            terminalreporter.write_line(f"{name} {status}  {title}")
    wall = getattr(config, "_s3_wall_time", None)
    if wall is not None:
        terminalreporter.write_line(
            f"end-to-end edit wall time: {wall:.1f} s "
            f"(reference hardware: 44 s)")
