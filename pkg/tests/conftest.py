import time

import numpy as np
import pytest

from tmgspec.operators import ModelConfig
from tmgspec.spectra import birman_schwinger_set, dirac_set

ACCEPTANCE_LINES = []
SUITE_BUDGET_S = 600.0
_START = {}


@pytest.fixture(scope="session")
def beta1_n12():
    return float(dirac_set(ModelConfig(n=2, N=12)).positive_real(1)[0])


@pytest.fixture(scope="session")
def beta1_n16():
    return float(dirac_set(ModelConfig(n=2, N=16)).positive_real(1)[0])


@pytest.fixture(scope="session")
def alpha1_n16():
    return float(birman_schwinger_set(ModelConfig(n=1, N=16), "A", residuals=False).positive_real(1)[0])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_sessionstart(session):
    _START["t"] = time.perf_counter()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
        elapsed = time.perf_counter() - _START.get("t", time.perf_counter())
        ok = elapsed <= SUITE_BUDGET_S
        terminalreporter.write_line(
            f"[{'PASS' if ok else 'FAIL'}] criterion 7 (runtime): session took {elapsed:.0f}s "
            f"(budget {SUITE_BUDGET_S:.0f}s for the full suite)"
        )
