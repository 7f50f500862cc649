import numpy as np
import pytest

from symmarkov.generators import complete_graph, cycle_graph, path_graph, random_connected
from symmarkov.operators import markov_system


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def two_cycle():
    return cycle_graph(2)


@pytest.fixture
def path3():
    return path_graph(3)


@pytest.fixture
def k3():
    return complete_graph(3)


@pytest.fixture
def random_systems():
    g = np.random.default_rng(7)
    return [markov_system(random_connected(int(g.integers(3, 15)), g)) for _ in range(12)]
