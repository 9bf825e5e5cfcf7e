import numpy as np
import pytest

from eablock.instance import Graph, Instance


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def lollipop():
    """Triangle 0-1-2 with a tail 2-3-4-5."""
    g = Graph.from_edges(6, [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5)])
    return Instance(g, np.array([0.5, -1.2, 0.8, 1.1, -0.3, 0.9]), 0.9)


def path_instance(k: int, J=1.0, beta=1.0) -> Instance:
    g = Graph.from_edges(k, [(i, i + 1) for i in range(k - 1)])
    return Instance(g, np.full(k - 1, J, dtype=float), beta)
