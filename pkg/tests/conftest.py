import numpy as np
import pytest

from diracfem.harness import ExperimentConfig, run_poisson_convergence, run_saddle_convergence

# PASS/FAIL lines from test_acceptance.py, echoed in the terminal summary
ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def poisson_reports():
    """Desk ladder h = 2^-4..2^-7, htilde = h, N_series = 2^11."""
    return run_poisson_convergence(ExperimentConfig(study="poisson"))


@pytest.fixture(scope="session")
def saddle_report():
    return run_saddle_convergence(ExperimentConfig(study="saddle"))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
