import numpy as np
import pytest

from locest.formation import Graph


def triangle() -> Graph:
    return Graph(3, np.array([[0, 1], [0, 2], [1, 2]]))


def path(n: int) -> Graph:
    return Graph(n, np.array([[i, i + 1] for i in range(n - 1)]))


def single_edge() -> Graph:
    return Graph(2, np.array([[0, 1]]))


def complete(n: int) -> Graph:
    iu, ju = np.triu_indices(n, k=1)
    return Graph(n, np.column_stack([iu, ju]))


def bowtie() -> Graph:
    """Two triangles sharing vertex 2."""
    return Graph(5, np.array([[0, 1], [0, 2], [1, 2], [2, 3], [2, 4], [3, 4]]))


def bowtie_with_bridge() -> Graph:
    """Bowtie plus an edge linking the outer vertices 1 and 3."""
    return Graph(5, np.array([[0, 1], [0, 2], [1, 2], [1, 3], [2, 3], [2, 4], [3, 4]]))


def random_connected_graph(rng: np.random.Generator, n: int, extra_edge_prob: float = 0.4) -> Graph:
    """Random spanning tree plus Bernoulli extra edges; always connected."""
    edges = set()
    order = rng.permutation(n)
    for k in range(1, n):
        a = int(order[k])
        b = int(order[rng.integers(0, k)])
        edges.add((min(a, b), max(a, b)))
    iu, ju = np.triu_indices(n, k=1)
    for a, b in zip(iu, ju):
        if rng.random() < extra_edge_prob:
            edges.add((int(a), int(b)))
    return Graph(n, np.array(sorted(edges)))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
