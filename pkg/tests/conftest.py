"""Prints one PASS/FAIL/SKIP line per acceptance criterion at the end of a run."""

import pytest

_outcomes = {}


def _label(item):
    mark = item.get_closest_marker("criterion")
    return mark.args[0] if mark else None


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    label = _label(item)
    if label is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[rep.outcome]
        prev = _outcomes.get(label)
        # a criterion split over several tests fails if any part fails
        if prev is None or prev == "PASS" or status == "FAIL":
            _outcomes[label] = status if prev != "FAIL" else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_outcomes, key=lambda s: (int(s.split(":")[0].rstrip("abc")), s)):
        terminalreporter.write_line(f"{_outcomes[label]}  {label}")
