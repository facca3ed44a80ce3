import math

import pytest

from spacs_tomo.empirics import ThetaSweep, sweep_quadratures
from spacs_tomo.model import ModelParams, generate_ensemble

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def full_sweep():
    return ThetaSweep.from_degrees(0, 180, 1)


@pytest.fixture(scope="session")
def vacuum_dataset(full_sweep):
    params = ModelParams(alpha=0, sigma=1 / math.sqrt(2), r=0.0, gamma=0.0, seed=11, target_conditioned=2**16)
    return sweep_quadratures(generate_ensemble(params), full_sweep)


@pytest.fixture(scope="session")
def coherent_dataset(full_sweep):
    params = ModelParams(alpha=1.0, sigma=1 / math.sqrt(2), r=0.0, gamma=0.0, seed=12, target_conditioned=2**16)
    return sweep_quadratures(generate_ensemble(params), full_sweep)


@pytest.fixture
def acceptance_line():
    def record(number, passed, text):
        ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {text}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
