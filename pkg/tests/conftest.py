import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance-gate pass/fail lines after the test report."""
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
