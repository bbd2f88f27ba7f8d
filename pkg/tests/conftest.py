import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_RESULTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_RESULTS] = []


@pytest.fixture
def report(request):
    """Record one acceptance line; the lines are repeated in the terminal summary."""
    lines = request.config.stash[_RESULTS]

    def emit(criterion: int, ok, detail: str):
        status = "INFO" if ok is None else "PASS" if ok else "FAIL"
        line = f"criterion {criterion:2d}: {status}  {detail}"
        print(line)
        lines.append(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_RESULTS, [])
    if lines:
        terminalreporter.section("acceptance")
        for line in sorted(lines, key=lambda s: (s[:13], s[14:18] == "INFO")):
            terminalreporter.write_line(line)
