from __future__ import annotations

import pytest

from dynmatch.engine import Engine
from dynmatch.graph_core import LeveledGraph
from dynmatch.params import Config, Params, derive


def make_params(n: int = 64, **overrides) -> Params:
    return derive(Config(n=n, **overrides))


def make_engine(n: int = 64, seed: int = 0, oracle=None, **overrides) -> Engine:
    return Engine(make_params(n, seed=seed, **overrides), seed=seed, oracle=oracle)


@pytest.fixture
def params64() -> Params:
    return make_params(64)


@pytest.fixture
def graph64(params64: Params) -> LeveledGraph:
    return LeveledGraph(params64)


def pytest_configure(config) -> None:
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")
    config._criterion_outcomes = {}


def pytest_runtest_logreport(report) -> None:
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marker = next((m for m in getattr(report, "_criteria", ())), None)
    if marker is None:
        return
    outcomes = _OUTCOMES.setdefault(marker, [])
    outcomes.append(report.outcome)


_OUTCOMES: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    rep._criteria = [m.args[0] for m in item.iter_markers("criterion")]


def pytest_terminal_summary(terminalreporter) -> None:
    if not _OUTCOMES:
        return
    from tests.acceptance_report import NOTES, TITLES

    terminalreporter.section("acceptance criteria")
    for num in sorted(TITLES):
        results = _OUTCOMES.get(num)
        if not results:
            continue
        passed = sum(1 for r in results if r == "passed")
        verdict = "PASS" if passed == len(results) else "FAIL"
        line = f"criterion {num:>2} {verdict}  {TITLES[num]} ({passed}/{len(results)} checks)"
        terminalreporter.write_line(line)
        for text in NOTES.get(num, []):
            terminalreporter.write_line(f"    {text}")
