from __future__ import annotations

import re
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_CRITERIA: dict[int, tuple[str, str, str]] = {}
_PATTERN = re.compile(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)")


def pytest_runtest_logreport(report):
    m = _PATTERN.search(report.nodeid)
    if not m:
        return
    num, name = int(m.group(1)), m.group(2)
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        verdict = {"passed": "PASS", "failed": "FAIL"}.get(report.outcome, report.outcome.upper())
        detail = dict(report.user_properties).get("detail", "")
        _CRITERIA[num] = (name.replace("_", " "), verdict, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        name, verdict, detail = _CRITERIA[num]
        line = f"criterion {num} [{verdict}] {name}"
        if detail:
            line += f": {detail}"
        terminalreporter.write_line(line)
