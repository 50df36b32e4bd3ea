import numpy as np
import pytest

from lipschitz_hawking.grid import make_grid
from lipschitz_hawking.metric import catalog
from lipschitz_hawking.mollify import build_family


@pytest.fixture(scope="session")
def two_slope():
    return catalog("grw_two_slope", {"n": 4, "m1": 0.5, "m2": 1.0})


@pytest.fixture(scope="session")
def two_slope_family(two_slope):
    grid = make_grid([(-1.0, 0.9)], (1901,))
    return build_family(two_slope.metric, grid, axes=(0,), seed=0)


@pytest.fixture(scope="session")
def two_slope3():
    return catalog("grw_two_slope", {"n": 3, "m1": 0.5, "m2": 1.0})


@pytest.fixture(scope="session")
def two_slope3_family(two_slope3):
    grid = make_grid([(-1.0, 0.9)], (1901,))
    return build_family(two_slope3.metric, grid, axes=(0,), seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_record():
    """Record and print the one-line verdict of an acceptance criterion."""
    def record(number: int, title: str, ok: bool, seconds: float, detail: str = "") -> None:
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'} ({seconds:6.1f} s) {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
