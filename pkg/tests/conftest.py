import os

import pytest
from hypothesis import settings

settings.register_profile("ci", deadline=None, derandomize=True, print_blob=True)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))

_CRITERIA_KEY = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_CRITERIA_KEY] = {}


@pytest.fixture
def criterion(request):
    """``criterion(k, ok, detail)`` records one acceptance line for the summary."""
    store = request.config.stash[_CRITERIA_KEY]

    def record(k: int, ok: bool, detail: str = ""):
        line = f"criterion {k}: {'PASS' if ok else 'FAIL'}" + (f" ({detail})" if detail else "")
        store[k] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_CRITERIA_KEY, {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(store):
        terminalreporter.write_line(store[k])
