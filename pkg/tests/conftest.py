import functools

import pytest

from dualarm_rise.config import scenario_preset
from dualarm_rise.harness import run_scenario


@functools.lru_cache(maxsize=None)
def _preset_run(scenario, controller):
    return run_scenario(scenario_preset(scenario), controller)


@pytest.fixture(scope="session")
def preset_run():
    """Runs each (scenario preset, controller) pair at most once per session."""
    return _preset_run


_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture(scope="session")
def acceptance_log():
    """Criterion number -> one-line verdict, echoed in the terminal summary."""
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[key])
