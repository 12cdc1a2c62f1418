"""Collect the acceptance verdicts and print one line per criterion."""

import re

_VERDICTS = {}


def pytest_runtest_logreport(report):
    match = re.search(r"test_acceptance\.py::test_criterion_(\d+)", report.nodeid)
    if not match or report.when not in ("setup", "call"):
        return
    number = int(match.group(1))
    if report.when == "setup" and report.passed:
        return
    detail = dict(report.user_properties).get("detail", "")
    if report.failed and not detail:
        detail = report.longrepr.reprcrash.message if hasattr(report.longrepr, "reprcrash") else "error"
    _VERDICTS[number] = ("PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_VERDICTS):
        verdict, detail = _VERDICTS[number]
        terminalreporter.write_line(f"criterion {number:2d}: {verdict}  {detail}")
