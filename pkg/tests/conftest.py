import numpy as np
import pytest

from mhgp.gp import GaussianProcess, KernelHyper


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_gp(X, y, sf2=1.0, ls=1.0, sn2=1e-8, mean_offset=None):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    hyper = KernelHyper(sf2, np.broadcast_to(np.asarray(ls, dtype=float), (X.shape[1],)), sn2)
    return GaussianProcess(X, np.asarray(y, dtype=float), hyper, mean_offset)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
