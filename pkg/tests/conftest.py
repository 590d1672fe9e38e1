import numpy as np
import pytest

from compcap.domain import BoundaryData, DomainSpec, build_grid

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def record():
    """Log one pass/fail line for an acceptance criterion."""
    def log(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return log


@pytest.fixture
def square16():
    return build_grid(DomainSpec.rectangle(1.0, 1.0), 16)


@pytest.fixture
def disk16():
    return build_grid(DomainSpec.disk(1.0), 16)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def random_beta():
    def make(grid, rng, margin=0.5):
        return BoundaryData(rng.uniform(-(1 - margin), 1 - margin, grid.n_edges), margin)
    return make
