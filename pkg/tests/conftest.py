import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "lagspec",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "lagspec"))

_ACCEPTANCE = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one ``(label, passed, detail)`` line per acceptance criterion."""
    return _ACCEPTANCE


@pytest.fixture(scope="session")
def ensemble_cache():
    """Ensemble results keyed by their spec, shared across the session."""
    from lagspec import mc

    store = {}

    def get(spec, overlaps=True):
        key = (spec, overlaps)
        if key not in store:
            store[key] = mc.run_ensemble(spec, overlaps=overlaps)
        return store[key]

    return get


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in sorted(_ACCEPTANCE, key=lambda e: e[0]):
        terminalreporter.write_line(f"{label}: {'PASS' if passed else 'FAIL'}  {detail}")
