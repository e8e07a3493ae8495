import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

from acceptance_report import LINES, TABLES  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    if not LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(LINES):
        terminalreporter.write_line(LINES[key])
    for title, text in TABLES:
        terminalreporter.write_line("")
        terminalreporter.write_line(title)
        for line in text.rstrip().splitlines():
            terminalreporter.write_line(line)
