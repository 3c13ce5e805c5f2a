"""Collects one pass/fail line per acceptance criterion for the terminal summary."""

_lines: dict[int, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or (report.when == "setup" and report.failed):
        status = "PASS" if report.passed else "FAIL"
        _lines[props["criterion"]] = (status, props.get("detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _lines:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_lines):
        status, detail = _lines[num]
        terminalreporter.write_line(f"criterion {num}: {status}  {detail}")
