from __future__ import annotations

import numpy as np
import pytest

from puea.oneclass import _backend

# Lines collected by the acceptance module, echoed in the terminal summary so
# they show up even when pytest captures stdout.
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(params=_backend.available())
def backend(request):
    with _backend.use(request.param):
        yield request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
