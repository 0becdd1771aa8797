import re

_CRITERIA: dict[int, tuple[str, str, str]] = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_c(\d+)_(\w+)", report.nodeid)
    if not m:
        return
    n = int(m.group(1))
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        measured = "; ".join(f"{k}={v}" for k, v in report.user_properties)
        _CRITERIA[n] = ("PASS" if report.passed else "FAIL", m.group(2).replace("_", " "), measured)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        status, name, measured = _CRITERIA[n]
        line = f"criterion {n:2d} {status}  {name}"
        terminalreporter.write_line(line + (f"  ({measured})" if measured else ""))
