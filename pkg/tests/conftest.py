import time

import pytest

_results = pytest.StashKey[dict]()
_started = pytest.StashKey[float]()
SUITE_BUDGET_S = 300.0


def pytest_configure(config):
    config.stash[_results] = {}
    config.stash[_started] = time.perf_counter()


class CriterionRecorder:
    def __init__(self, store):
        self._store = store

    def record(self, number: int, ok: bool, detail: str):
        self._store[number] = (ok, detail)


@pytest.fixture
def criterion(request):
    return CriterionRecorder(request.config.stash[_results])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_results, {})
    if not results:
        return
    elapsed = time.perf_counter() - config.stash[_started]
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(results):
        ok, detail = results[k]
        tr.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {k}: {detail}")
    if 10 in results:
        ok = elapsed <= SUITE_BUDGET_S
        tr.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion 10 (runtime): "
                      f"session took {elapsed:.1f} s, budget {SUITE_BUDGET_S:.0f} s")


def pytest_sessionfinish(session, exitstatus):
    elapsed = time.perf_counter() - session.config.stash[_started]
    if 10 in session.config.stash.get(_results, {}) and elapsed > SUITE_BUDGET_S:
        session.exitstatus = pytest.ExitCode.TESTS_FAILED
