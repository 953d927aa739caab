import math

import pytest

from zsperiodic import potential as pot


@pytest.fixture(scope="session")
def two_gap():
    return pot.from_fourier([0, 0, 0.5, 0.25, 0], 1.0)


@pytest.fixture(scope="session")
def plane_wave():
    return pot.constant(1.0, 0.75 * math.pi, 1.0)


@pytest.fixture(scope="session")
def smooth():
    return pot.smooth_random(3)


_ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance():
    """Record a one-line verdict for an acceptance criterion."""
    def record(number: int, title: str, passed: bool, detail: str, seconds: float) -> None:
        line = f"criterion {number} {'PASS' if passed else 'FAIL'}: {title}: {detail} ({seconds:.1f} s)"
        print(line)
        _ACCEPTANCE.append(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
