import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("mlspectral", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("mlspectral")

# criterion number -> [passed, notes]; filled from the outcome of every test
# marked ``criterion(n)``, so an error or failed assert shows up as FAIL
ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion exercised by the test")


@pytest.fixture
def note(request):
    """Append a short measurement to the criterion's summary line."""
    notes = []
    request.node.criterion_notes = notes
    return notes.append


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or not (rep.when == "call" or rep.failed):
        return
    entry = ACCEPTANCE.setdefault(mark.args[0], [True, []])
    entry[0] = entry[0] and rep.passed
    entry[1].extend(getattr(item, "criterion_notes", []))
    if rep.failed:
        entry[1].append(f"{item.name} failed")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, notes = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {'; '.join(notes)}")
