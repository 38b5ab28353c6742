import json
from importlib import resources
from pathlib import Path

import numpy as np
import pytest

from sacebounds.cli import parse_input_file

DATA = resources.files("sacebounds") / "data"
FROZEN = json.loads((Path(__file__).parent / "oracle" / "frozen.json").read_text())


def data_path(name: str) -> Path:
    return Path(str(DATA / name))


@pytest.fixture(scope="session")
def frozen():
    return FROZEN


@pytest.fixture(scope="session")
def truth_violated():
    return parse_input_file(data_path("monotonicity_violated.json"))


@pytest.fixture(scope="session")
def truth_biased():
    return parse_input_file(data_path("two_point_biased.json"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        report.user_properties.append(("criterion", mark.args[0]))


def pytest_terminal_summary(terminalreporter):
    verdict = {}
    for reports in terminalreporter.stats.values():
        for rep in reports:
            props = dict(getattr(rep, "user_properties", ()))
            if "criterion" not in props:
                continue
            n = props["criterion"]
            ok = rep.outcome in ("passed",) or (rep.when != "call" and rep.outcome != "failed")
            verdict[n] = verdict.get(n, True) and ok
    if verdict:
        terminalreporter.section("acceptance criteria")
        for n in sorted(verdict):
            terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if verdict[n] else 'FAIL'}")
