import numpy as np
import pytest

from riselect.core import RawData, standardize


def random_dataset(rng, n, p, collinear=False):
    X = rng.standard_normal((n, p))
    if collinear and p >= 3:
        X[:, -1] = X[:, 0] - 2.0 * X[:, 1]
    y = X[:, : min(3, p)].sum(axis=1) + rng.standard_normal(n)
    return standardize(RawData(X, y))


def orthonormal_dataset(rng, n, p):
    """Centered, unit-norm, mutually orthogonal columns and a unit-norm response."""
    A = rng.standard_normal((n, p + 1))
    A -= A.mean(axis=0)
    Q, _ = np.linalg.qr(A)
    # Q's columns are orthogonal to the constant vector because A was centered
    X = Q[:, :p]
    y = X @ rng.standard_normal(p) + 0.5 * Q[:, p]
    y /= np.linalg.norm(y)
    from riselect.core import Dataset

    return Dataset(X, y, np.zeros(p), np.ones(p))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one summary line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
