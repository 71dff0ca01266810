import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ftbp.circuit import build_circuit
from ftbp.codes import build_code, build_toy_code

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def toy():
    return build_toy_code()


@pytest.fixture(scope="session")
def toy3(toy):
    return build_circuit(toy, 3, perfect_tail=True)


@pytest.fixture(scope="session")
def toric4():
    return build_code("toric", 4)


@pytest.fixture(scope="session")
def xzzx5():
    return build_code("xzzx", 5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance verdicts, printed as one line per criterion at the end of the run
VERDICTS: dict = {}


@pytest.fixture
def verdict(request):
    marker = request.node.get_closest_marker("criterion")

    def record(ok, detail):
        VERDICTS[marker.args[0]] = (bool(ok), detail)
        print(f"criterion {marker.args[0]}: {'PASS' if ok else 'FAIL'} | {detail}")
        return ok

    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker and rep.when == "call" and marker.args[0] not in VERDICTS:
        VERDICTS[marker.args[0]] = (rep.passed, "no verdict recorded: " + rep.outcome)


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(VERDICTS):
        ok, detail = VERDICTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'} | {detail}")
