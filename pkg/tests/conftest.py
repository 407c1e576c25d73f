import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from synthetic_oulad import make_oulad  # noqa: E402

_criteria: dict[str, str] = {}


@pytest.fixture(scope="session")
def oulad_dir(tmp_path_factory):
    return make_oulad(tmp_path_factory.mktemp("oulad"))


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or report.outcome != "passed":
        name = report.nodeid.split("::")[-1]
        if report.outcome == "failed" or name not in _criteria:
            _criteria[name] = report.outcome.upper()


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _criteria.items():
        verdict = "PASS" if outcome == "PASSED" else outcome.replace("FAILED", "FAIL")
        terminalreporter.write_line(f"{verdict:5s} {name}")
