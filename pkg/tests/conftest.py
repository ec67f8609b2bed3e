from pathlib import Path

import pytest

from ddmeasure.pauli import load_hamiltonian
from ddmeasure.simulator import ground_state

DATA = Path(__file__).resolve().parents[1] / "src" / "ddmeasure" / "data"
FIXTURES = Path(__file__).resolve().parent / "fixtures"

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def h_bk():
    return load_hamiltonian(DATA / "h2_bk.txt")


@pytest.fixture(scope="session")
def h_jw():
    return load_hamiltonian(DATA / "h2_jw.txt")


@pytest.fixture(scope="session")
def ground_bk(h_bk):
    return ground_state(h_bk)


@pytest.fixture(scope="session")
def ground_jw(h_jw):
    return ground_state(h_jw)


@pytest.fixture
def report():
    """Record one acceptance line; printed in the terminal summary."""
    def _report(number: int, ok: bool, detail: str) -> bool:
        ACCEPTANCE_LINES.append(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok
    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
