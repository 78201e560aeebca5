import numpy as np
import pytest

from mempca.panel import StandardizedPanel, standardize_columns


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_panel(matrix, kind="log-volatility", ids=None, dates=None) -> StandardizedPanel:
    """Standardize a raw matrix into a panel with generated ids/dates."""
    matrix = np.asarray(matrix, dtype=float)
    ids = ids or [f"A{j:03d}" for j in range(matrix.shape[1])]
    dates = dates or [f"t{t:05d}" for t in range(matrix.shape[0])]
    return StandardizedPanel(standardize_columns(matrix, ids), kind, ids, dates).validate()


@pytest.fixture
def random_panel(rng):
    def _make(T=120, N=6, kind="log-volatility"):
        return make_panel(rng.standard_normal((T, N)), kind=kind)
    return _make
