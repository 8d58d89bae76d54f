import networkx as nx
import numpy as np
import pytest

from cycledgp.bench import generate_instance
from cycledgp.graph import WeightedGraph


def graph_from_points(points, pairs, name=""):
    """Exact-distance instance on the given 0-based pairs."""
    points = np.asarray(points, dtype=float)
    triples = [(u, v, float(np.linalg.norm(points[u] - points[v]))) for u, v in pairs]
    return WeightedGraph.from_edges(len(points), points.shape[1], triples, points, name)


def to_networkx(g):
    G = nx.Graph()
    G.add_nodes_from(range(g.n))
    for e, (u, v) in enumerate(g.edges.tolist()):
        G.add_edge(u, v, index=e)
    return G


def random_graphs(count, n_range, density=0.4, K=2, seed=0):
    rng = np.random.default_rng(seed)
    for i in range(count):
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        yield generate_instance(n, K, density, seed * 1000 + i)


@pytest.fixture
def triangle():
    """The 3-4-5 right triangle in the plane, centred."""
    points = np.array([[0.0, 0.0], [3.0, 0.0], [3.0, 4.0]])
    return graph_from_points(points - points.mean(axis=0), [(0, 1), (1, 2), (0, 2)], "triangle")


@pytest.fixture
def square():
    """Unit-square C4: edges 0-1, 1-2, 2-3, 0-3."""
    points = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    return graph_from_points(points, [(0, 1), (1, 2), (2, 3), (0, 3)], "square")


@pytest.fixture
def k4():
    points = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    return graph_from_points(points, pairs, "k4")


@pytest.fixture
def path3():
    points = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 2.0]])
    return graph_from_points(points, [(0, 1), (1, 2)], "path3")


@pytest.fixture
def bowtie():
    """Two triangles sharing vertex 2."""
    points = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 1.0], [0.0, 2.0], [1.0, 2.0]])
    return graph_from_points(points, [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (2, 4)], "bowtie")


@pytest.fixture
def two_triangles():
    """Two disjoint triangles, n = 6."""
    points = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [5.0, 5.0], [6.0, 5.0], [5.0, 7.0]])
    return graph_from_points(points, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)], "two-triangles")


@pytest.fixture
def coincident():
    """Vertices 0 and 1 share a position, so edge 0-1 has length zero."""
    points = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [1.0, 1.0]])
    return graph_from_points(points, [(0, 1), (1, 2), (0, 2), (2, 3), (1, 3)], "coincident")
