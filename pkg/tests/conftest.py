import numpy as np
import pytest

from cstoa import FrameConfig, gaussian2_pulse

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record a one-line acceptance verdict that is echoed in the terminal summary."""

    def _report(name: str, passed: bool, detail: str) -> None:
        line = f"{name}: {'PASS' if passed else 'FAIL'} -- {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)

    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def pulse8():
    return gaussian2_pulse(1e-9, 8e9)


@pytest.fixture(scope="session")
def frame():
    return FrameConfig(200e-9, 8e9)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
