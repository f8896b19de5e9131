import pytest

_verdicts: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion checked by a test")
    config.addinivalue_line("markers", "slow: long-running Monte Carlo or grid sweep")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when not in ("setup", "call"):
        return
    number, text = mark.args
    failed = report.failed or (report.when == "setup" and report.skipped)
    if report.when == "call" or failed:
        prev = _verdicts.get(number, (text, "PASS"))[1]
        verdict = "FAIL" if failed or prev == "FAIL" else "PASS"
        _verdicts[number] = (text, verdict)


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_verdicts):
        text, verdict = _verdicts[number]
        terminalreporter.write_line(f"criterion {number:>2}: {verdict}  {text}")
