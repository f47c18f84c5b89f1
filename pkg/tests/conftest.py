import re
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

# acceptance results: criterion number -> [title, outcome, detail]
_CRITERIA: dict[int, list] = {}
_CRITERION_NAME = re.compile(r"test_criterion_(\d+)_(\w+)")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def detail(request):
    """Lets an acceptance test attach a one-line measurement to its summary row."""
    m = _CRITERION_NAME.match(request.node.name)
    notes: list[str] = []
    yield notes.append
    if m:
        _CRITERIA.setdefault(int(m.group(1)), [m.group(2), None, ""])[2] = "; ".join(notes)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = _CRITERION_NAME.match(item.name)
    if not m:
        return
    entry = _CRITERIA.setdefault(int(m.group(1)), [m.group(2), None, ""])
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        entry[1] = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        title, outcome, note = _CRITERIA[num]
        line = f"[PRIMARY] criterion {num:2d} {title.replace('_', ' ')}: {outcome or 'NOT RUN'}"
        terminalreporter.write_line(line + (f"  ({note})" if note else ""))
