import re
import time

import numpy as np
import pytest

from basin_forge.pipeline import RunConfig, run_pipeline

_AC_DETAIL = {}
_AC_OUTCOME = {}


def brute_hausdorff(a, b):
    from basin_forge.sphere import chordal_distance

    d = chordal_distance(np.asarray(a)[:, None], np.asarray(b)[None, :])
    return max(d.min(axis=1).max(), d.min(axis=0).max())


def _timed_run(config, out):
    t0 = time.perf_counter()
    res = run_pipeline(config, out)
    res.elapsed = time.perf_counter() - t0
    return res


def unit_circle_config():
    return RunConfig(scenario="unit_circle", eps=0.25, resolution=512, outer_budget=500)


@pytest.fixture(scope="session")
def unit_circle_run(tmp_path_factory):
    return _timed_run(unit_circle_config(), tmp_path_factory.mktemp("unit_circle"))


@pytest.fixture(scope="session")
def newton_run(tmp_path_factory):
    return _timed_run(RunConfig(scenario="newton", d=3, eps=0.35, resolution=512), tmp_path_factory.mktemp("newton"))


def _criterion(item):
    m = re.match(r"test_ac(\d+)_", item.name)
    return f"AC-{int(m.group(1))}" if m else None


@pytest.fixture
def detail(request):
    """Free-text summary printed next to the criterion's pass/fail line."""
    name = _criterion(request.node)

    def put(text):
        _AC_DETAIL[name] = text

    return put


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    name = _criterion(item)
    if name and (rep.when == "call" or rep.failed):
        if rep.failed or name not in _AC_OUTCOME:
            _AC_OUTCOME[name] = "PASS" if rep.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _AC_OUTCOME:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for name in sorted(_AC_OUTCOME, key=lambda s: int(s[3:])):
        tr.line(f"{name} {_AC_OUTCOME[name]}  {_AC_DETAIL.get(name, '')}".rstrip())
