import numpy as np
import pytest

from gnnmeter.generate import complete_graph, erdos_renyi, path_graph, star_graph
from gnnmeter.rng import rand_uniform


def k3():
    return complete_graph(3)


def random_graph(n: int, expected_degree: float, seed: int):
    return erdos_renyi(n, expected_degree, seed)


def random_features(n: int, k: int, seed: int) -> np.ndarray:
    return np.array([[2.0 * rand_uniform(seed, 77, i, j) - 1.0 for j in range(k)]
                     for i in range(n)])


@pytest.fixture
def triangle():
    return k3()


@pytest.fixture
def small_corpus():
    """Fixed desk-scale corpus: K3, paths, stars, ER (all n <= 16)."""
    return [
        ("k3", k3()),
        ("path4", path_graph(4)),
        ("path7", path_graph(7)),
        ("star5", star_graph(5)),
        ("star9", star_graph(9)),
        ("er12", erdos_renyi(12, 4.0, seed=3)),
        ("er16", erdos_renyi(16, 5.0, seed=9)),
    ]
