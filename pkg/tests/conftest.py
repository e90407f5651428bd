import numpy as np
import pytest

from ionscat.potentials import default_surface
from ionscat.propagator import Grid


@pytest.fixture(scope="session")
def surface():
    return default_surface()


@pytest.fixture(scope="session")
def reduced_grid():
    """Reduced propagation grid used by the heavier physics checks (single step, no extrapolation)."""
    return Grid(r_min=4.0, r_max=2000.0, step=0.01, extrapolate=False)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE: dict = {}


@pytest.fixture(scope="session")
def acceptance_report():
    """Record ``(criterion, passed, detail)`` for the end-of-run summary."""

    def record(number: int, passed: bool, detail: str) -> bool:
        prev = _ACCEPTANCE.get(number)
        ok = passed and (prev is None or prev[0])
        _ACCEPTANCE[number] = (ok, detail if prev is None else f"{prev[1]}; {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
