from __future__ import annotations

from collections import defaultdict

import pytest

# criterion number -> list of (test name, outcome, detail)
_CRITERIA: dict[int, list[tuple[str, str, str]]] = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance check belonging to criterion n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "setup" and report.outcome != "passed":
        state = "xfail" if hasattr(report, "wasxfail") else report.outcome
    elif report.when == "call":
        state = "xfail" if hasattr(report, "wasxfail") else report.outcome
    else:
        return
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    _CRITERIA[marker.args[0]].append((item.name, state, detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        entries = _CRITERIA[n]
        ok = all(state == "passed" for _, state, _ in entries)
        failed = [name for name, state, _ in entries if state != "passed"]
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}"
        if failed:
            line += " (not met: " + ", ".join(failed) + ")"
        tr.write_line(line)
        for name, state, detail in entries:
            if detail:
                tr.write_line(f"    {name} [{state}] {detail}")
