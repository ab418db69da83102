import pytest

PROPERTY_DIR = "tests/properties/"

# filled as the session runs; properties/ is collected before test_acceptance.py
_property_outcomes: dict[str, str] = {}
_acceptance_lines: list[str] = []


def pytest_runtest_logreport(report):
    if PROPERTY_DIR not in report.nodeid.replace("\\", "/"):
        return
    if report.when == "call" or report.failed:
        if _property_outcomes.get(report.nodeid) != "failed":
            _property_outcomes[report.nodeid] = report.outcome


@pytest.fixture
def property_outcomes():
    return _property_outcomes


@pytest.fixture
def acceptance_log():
    return _acceptance_lines


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
