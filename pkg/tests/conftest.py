import numpy as np
import pytest

from qseal.rng import stream

# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return stream(20240601, 0)


def random_state(rng: np.random.Generator, arity: int) -> np.ndarray:
    v = rng.normal(size=1 << arity)
    return v / np.linalg.norm(v)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
