import re

from acceptance_report import LINES


def _order(key):
    num, suffix = re.match(r"(\d+)(.*)", key).groups()
    return int(num), suffix


def pytest_terminal_summary(terminalreporter):
    if LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(LINES, key=_order):
            terminalreporter.write_line(LINES[key])
