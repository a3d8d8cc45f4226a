import numpy as np
import pytest

from inexact_newton.data_io import Dataset, make_synthetic_dataset
from inexact_newton.problems import NlsProblem

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_nls():
    return NlsProblem(make_synthetic_dataset(20, 5, seed=3, signal=3.0))


def single_row_problem(row, label):
    """One-component NLS problem with a dense feature row."""
    import scipy.sparse as sp

    return NlsProblem(Dataset(sp.csr_matrix(np.atleast_2d(row)), np.array([float(label)])))
