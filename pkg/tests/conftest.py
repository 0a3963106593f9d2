import numpy as np
import pytest

# master seed for every study and seeded draw in the suite; fixed up front
STUDY_SEED = 20240607

# (criterion, passed, detail) lines gathered by the acceptance module
ACCEPTANCE_LINES: list = []


def record(criterion: str, passed: bool, detail: str = "") -> bool:
    line = f"[{'PASS' if passed else 'FAIL'}] {criterion}" + (f": {detail}" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
