import pytest

from helpers import entry, synthetic_world
from newsgeo.gazetteer import Gazetteer
from newsgeo.index import build_index


@pytest.fixture
def newcastles():
    gaz = Gazetteer([
        entry(2155472, "Newcastle", -32.92953, 151.7801, "AU", 322278, "New South Wales"),
        entry(2641673, "Newcastle upon Tyne", 54.97328, -1.61396, "GB", 192382, "England",
              alts=["Newcastle"], abbrs=["NCL"]),
        entry(2158177, "Melbourne", -37.814, 144.96332, "AU", 4246375, "Victoria"),
        entry(4163971, "Melbourne", 28.08363, -80.60811, "US", 83029, "Florida"),
        entry(5128581, "New York City", 40.71427, -74.00597, "US", 8804190, "New York",
              abbrs=["NYC"]),
    ])
    return gaz, build_index(gaz)


@pytest.fixture(scope="session")
def world():
    gaz, corpus = synthetic_world()
    return gaz, build_index(gaz), corpus


def pytest_terminal_summary(terminalreporter):
    rows = {}
    for outcome in ("passed", "failed", "skipped", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py::test_criterion_" not in nodeid:
                continue
            if outcome == "passed" and rep.when != "call":
                continue
            name = nodeid.split("::", 1)[1]
            rows[name] = outcome.upper().replace("PASSED", "PASS").replace(
                "FAILED", "FAIL").replace("SKIPPED", "SKIP")
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(rows):
        terminalreporter.write_line(f"{rows[name]:5s} {name}")
