import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fibresense.ladder import garment_ladder, paper_ladder  # noqa: E402
from fibresense.signal_chain import paper_excitation  # noqa: E402

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = {}


def record_criterion(number, title, passed, detail):
    ACCEPTANCE_LINES[number] = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title} | {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture(scope="session")
def ladder():
    return paper_ladder()


@pytest.fixture(scope="session")
def garment():
    return garment_ladder()


@pytest.fixture(scope="session")
def exc():
    return paper_excitation()


@pytest.fixture(scope="session")
def configs():
    return CONFIGS
