"""Replay acceptance verdict lines after the run, outside capture."""

import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    mod = sys.modules.get("test_acceptance") or sys.modules.get(
        "tests.test_acceptance"
    )
    if mod is None:
        return
    lines = getattr(mod, "VERDICTS", None)
    if not lines:
        return
    terminalreporter.ensure_newline()
    terminalreporter.section("acceptance verdicts", sep="-")
    for line in lines:
        terminalreporter.write_line(line)
