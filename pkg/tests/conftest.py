import time

import pytest

_RESULTS = {}


def pytest_sessionstart(session):
    session.config._qmem_t0 = time.perf_counter()


def pytest_collection_modifyitems(config, items):
    # the runtime criterion has to see every other test finish first
    last = [it for it in items if it.name == "test_criterion_9_runtime"]
    items[:] = [it for it in items if it not in last] + last


@pytest.fixture
def criterion(request):
    """Records one acceptance line; call as criterion(n, ok, detail)."""
    def record(n, ok, detail):
        _RESULTS[n] = (bool(ok), detail)
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        with request.config.pluginmanager.getplugin("capturemanager").global_and_fixture_disabled():
            print("\n" + line)
        return ok
    return record


@pytest.fixture
def session_elapsed(request):
    return lambda: time.perf_counter() - request.config._qmem_t0


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        ok, detail = _RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
