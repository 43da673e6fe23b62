import json
from pathlib import Path

import pytest

from mtppquery import HawkesModel, HawkesParams, PoissonModel, random_hawkes

ORACLES = Path(__file__).parent / "oracles" / "frozen.json"
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def poisson13():
    return PoissonModel.from_rates([1.0, 3.0])


@pytest.fixture
def hawkes2():
    return HawkesModel(HawkesParams([0.5, 0.5], [[0.8, 0.8], [0.8, 0.8]], [[2.0, 2.0], [2.0, 2.0]]))


@pytest.fixture
def hawkes4():
    return HawkesModel(random_hawkes(4, 1.0, seed=5))


@pytest.fixture(scope="session")
def oracles():
    return json.loads(ORACLES.read_text())


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
