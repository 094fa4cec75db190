"""Shared fixtures and the per-criterion acceptance summary."""
from __future__ import annotations

import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("default")

_RESULTS: dict = {}
_DETAILS: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.fixture
def record(request):
    """Callable that attaches a one-line measurement to the current test."""
    lines = _DETAILS.setdefault(request.node.nodeid, [])

    def _record(text: str) -> None:
        lines.append(str(text))
        print(text)

    return _record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _RESULTS.setdefault(int(marker.args[0]), []).append((item.name, rep.passed, item.nodeid))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_RESULTS):
        runs = _RESULTS[n]
        ok = all(passed for _, passed, _ in runs)
        parts = []
        for name, passed, nodeid in runs:
            detail = "; ".join(_DETAILS.get(nodeid, []))
            parts.append(f"{name} {'pass' if passed else 'FAIL'}" + (f" [{detail}]" if detail else ""))
        tr.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  " + " | ".join(parts))
