"""Collect acceptance outcomes and print one PASS/FAIL line per criterion."""

import re
from collections import OrderedDict

_CRITERION = re.compile(r"test_c(\d+)")
_outcomes: "OrderedDict[int, list[tuple[str, bool]]]" = OrderedDict()


def pytest_runtest_logreport(report):
    if "test_acceptance" not in report.nodeid:
        return
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    name = report.nodeid.split("::")[-1]
    m = _CRITERION.match(name)
    if m:
        _outcomes.setdefault(int(m.group(1)), []).append((name, report.outcome == "passed"))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_outcomes):
        parts = _outcomes[num]
        ok = all(p for _, p in parts)
        failed = [n for n, p in parts if not p]
        tail = f"  (failing: {', '.join(failed)})" if failed else ""
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}{tail}")
