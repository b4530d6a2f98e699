from __future__ import annotations

import pytest

# criterion number -> (status, detail); filled by the acceptance suite
CRITERIA: dict[int, tuple[str, str]] = {}


@pytest.fixture
def criterion():
    """``criterion(n, ok, detail)`` records one acceptance line; ``ok=None`` marks a skip."""

    def record(n: int, ok: bool | None, detail: str) -> None:
        status = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
        CRITERIA[n] = (status, detail)

    return record


def pytest_runtest_logreport(report):
    # a test that errors before recording still gets a line
    if report.when == "call" and report.failed and "test_acceptance" in report.nodeid:
        n = getattr(report, "criterion_number", None)
        if n is not None and n not in CRITERIA:
            CRITERIA[n] = ("FAIL", "raised before recording a result")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark and mark.args:
        rep.criterion_number = mark.args[0]


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        status, detail = CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:>2}: {status}  {detail}")
