import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(autouse=True)
def _isolated_cache(monkeypatch):
    monkeypatch.delenv("FRACLAP_CACHE_DIR", raising=False)


CRITERIA = range(1, 10)


def pytest_configure(config):
    config._criteria = {}


@pytest.fixture
def criterion(request):
    """Record the verdict of an acceptance criterion; summarised at the end of the run."""

    def record(number, passed, detail):
        request.config._criteria[number] = (bool(passed), detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}")

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = getattr(config, "_criteria", {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in CRITERIA:
        if k in results:
            passed, detail = results[k]
            terminalreporter.write_line(f"criterion {k}: {'PASS' if passed else 'FAIL'} {detail}")
        else:
            terminalreporter.write_line(f"criterion {k}: NOT RUN")
