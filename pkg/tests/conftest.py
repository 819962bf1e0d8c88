from __future__ import annotations

import sys
from collections import defaultdict
from pathlib import Path

import pytest

# tests import the shared oracles as a top-level module
sys.path.insert(0, str(Path(__file__).resolve().parent))

CRITERIA = {
    1: "control norms, Example 1",
    2: "final-error decay, Example 1",
    3: "heat-equation control, Example 3",
    4: "ill-conditioned regime, Example 2",
    5: "regularized controls",
    6: "direct-solver oracle",
    7: "scenario presets",
    8: "structural properties",
}

_outcomes: dict[int, list[tuple[str, str]]] = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(n): test belongs to acceptance criterion n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    rep = (yield).get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        if hasattr(rep, "wasxfail"):
            status = "xfail"
        else:
            status = rep.outcome
        _outcomes[mark.args[0]].append((item.name, status))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n, title in CRITERIA.items():
        results = _outcomes.get(n)
        if not results:
            tr.write_line(f"criterion {n} ({title}): NOT RUN")
            continue
        bad = [name for name, status in results if status != "passed"]
        verdict = "PASS" if not bad else "FAIL"
        detail = f"{len(results) - len(bad)}/{len(results)} checks passed"
        if bad:
            detail += "; failing: " + ", ".join(bad)
        tr.write_line(f"criterion {n} ({title}): {verdict} [{detail}]")
