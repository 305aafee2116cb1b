from collections import OrderedDict

import pytest

_criteria: "OrderedDict[int, dict]" = OrderedDict()


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, label = marker.args
    entry = _criteria.setdefault(number, {"label": label, "passed": 0, "failed": 0})
    if report.when == "call" or (report.when == "setup" and not report.passed):
        entry["passed" if report.passed else "failed"] += 1


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        verdict = "PASS" if entry["failed"] == 0 and entry["passed"] > 0 else "FAIL"
        terminalreporter.write_line(
            f"criterion {number}: {verdict}  {entry['label']}  ({entry['passed']} passed, {entry['failed']} failed)"
        )
