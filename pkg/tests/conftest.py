import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

_ACCEPTANCE: dict[str, str] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def criterion(request):
    """``report(ok, detail)`` records one acceptance line for this test."""
    def report(ok: bool, detail: str):
        title = request.node.function.__doc__.strip().splitlines()[0]
        _ACCEPTANCE[request.node.nodeid] = f"{'PASS' if ok else 'FAIL'}  {title}: {detail}"
        return ok
    return report


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if "test_acceptance" in item.nodeid and rep.when == "call" and rep.failed \
            and item.nodeid not in _ACCEPTANCE:
        title = (item.function.__doc__ or item.name).strip().splitlines()[0]
        _ACCEPTANCE[item.nodeid] = f"FAIL  {title}: raised {call.excinfo.typename}"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for line in _ACCEPTANCE.values():
        terminalreporter.write_line(line)
