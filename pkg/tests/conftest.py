import numpy as np
import pytest

from rrhplace.access import AccessModel
from rrhplace.model import Layout, NetworkParams, generate_traffic


@pytest.fixture(scope="session")
def desk_params():
    """Reference deployment shrunk to desk size (9 cells, 4 RRHs of 2 antennas, 3 users)."""
    return NetworkParams(N=4, M=2, K=3)


@pytest.fixture(scope="session")
def small_params():
    return NetworkParams(Q=4, N=2, M=4, K=3)


@pytest.fixture(scope="session")
def small_traffic(small_params):
    return generate_traffic(5, small_params, quad_order=12)


@pytest.fixture(scope="session")
def desk_traffic(desk_params):
    return generate_traffic(1, desk_params, quad_order=12)


@pytest.fixture
def small_layout(small_params):
    return Layout.random(small_params, np.random.default_rng(11))


@pytest.fixture(scope="session")
def small_access(small_params, small_traffic):
    return AccessModel(small_params, small_traffic)


# --- acceptance summary: one PASS/FAIL line per numbered criterion ----------------------

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): numbered acceptance criterion")


@pytest.fixture
def note(request):
    """Attach a short measurement summary to the running criterion's verdict line."""
    request.node._notes = []
    return request.node._notes.append


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or not (rep.when == "call" or rep.failed):
        return
    verdict = "PASS" if rep.passed else "FAIL"
    _CRITERIA[mark.args[0]] = (verdict, "; ".join(getattr(item, "_notes", [])))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        verdict, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:>2}: {verdict}  {detail}".rstrip())
