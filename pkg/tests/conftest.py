import numpy as np
import pytest

_ACCEPTANCE: dict[str, tuple[str, str, str]] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    label = marker.args[0]
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
        _ACCEPTANCE[item.nodeid] = (label, "PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, verdict, detail in sorted(_ACCEPTANCE.values(), key=lambda t: int(t[0].split()[0][2:])):
        terminalreporter.write_line(f"[{verdict}] {label}")
        if detail:
            terminalreporter.write_line(f"         {detail}")
