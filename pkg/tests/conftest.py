"""Shared pytest wiring: the acceptance-criterion marker and its summary.

Tests tagged @pytest.mark.criterion("P3", "...") get one PASS/FAIL line
each in the terminal summary so the acceptance surface is readable at a
glance.
"""

import pytest


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "criterion(name, title): tag a test as one acceptance criterion")
    config._criterion_results = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    name = marker.args[0]
    title = marker.args[1] if len(marker.args) > 1 else ""
    results = item.config._criterion_results
    if report.when == "call":
        results[name] = (report.outcome == "passed", title)
    elif report.when == "setup" and report.outcome != "passed":
        results[name] = (False, title)


def _criterion_key(name):
    head = name.rstrip("0123456789")
    tail = name[len(head):]
    return (head, int(tail) if tail else 0)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = getattr(config, "_criterion_results", {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(results, key=_criterion_key):
        passed, title = results[name]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{name} {status}  {title}")
