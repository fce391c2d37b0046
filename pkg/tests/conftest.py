"""Per-criterion PASS/FAIL summary for the acceptance suite."""
import pytest

_RESULTS = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title, budget = marker.args
    # a failure in setup or teardown also fails the criterion
    if report.when == "call" or report.failed:
        prev = _RESULTS.get(number)
        passed = report.passed and (prev is None or prev[0])
        duration = report.duration if report.when == "call" else (prev[2] if prev else 0.0)
        _RESULTS[number] = (passed, title, duration, budget)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        passed, title, duration, budget = _RESULTS[number]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(
            f"[{status}] criterion {number:>2}: {title} ({duration:.2f} s, budget {budget:g} s)")
