from __future__ import annotations

import numpy as np
import pytest

from clair.contrast import StackedPairMatrix, n_pairs


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_stacked(rng, n_clients=4, block_rows=3, cols=5) -> StackedPairMatrix:
    data = rng.normal(size=(n_pairs(n_clients) * block_rows, cols))
    return StackedPairMatrix(n_clients, block_rows, cols, data)
