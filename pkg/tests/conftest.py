import warnings

import pytest
from hypothesis import HealthCheck, settings

from nonlocal_atlas import build_mesh, make_nonlinearity

settings.register_profile(
    "atlas", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("atlas")

CATALOGUE = [
    ("power", {"p": 1.5}),
    ("saturating", {"beta0": 2.0}),
    ("sqrt_shift", {"theta0": 0.5}),
    ("rational", {"theta0": 0.5, "beta0": 3.0}),
    ("arctan", {"theta0": 0.5, "beta0": 3.0}),
]

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    n, title = mark.args
    ok = rep.passed if rep.when == "call" else not rep.failed
    prev = _criteria.get(n, (True, title))
    _criteria[n] = (prev[0] and ok, title)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        ok, title = _criteria[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {title}")


def make_nl(kind, params):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        return make_nonlinearity(kind, params)


@pytest.fixture(scope="session")
def mesh():
    return build_mesh(1, 1.0, 1024)


@pytest.fixture(scope="session")
def small_mesh():
    return build_mesh(1, 1.0, 256)


@pytest.fixture(params=CATALOGUE, ids=[k for k, _ in CATALOGUE])
def catalogue_nl(request):
    return make_nl(*request.param)
