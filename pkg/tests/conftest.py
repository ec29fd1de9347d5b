import numpy as np
import pytest

from network import Network


def clique_links(nodes, weight=1.0):
    return [(a, b, weight) for i, a in enumerate(nodes) for b in nodes[i + 1:]]


def random_network(rng, node_count, link_count, directed=False):
    """Connected random network: a ring plus random extra links with weights in [0.5, 2]."""
    links = [(i, (i + 1) % node_count, float(rng.uniform(0.5, 2.0))) for i in range(node_count)]
    for _ in range(link_count):
        a, b = rng.choice(node_count, size=2, replace=False)
        links.append((int(a), int(b), float(rng.uniform(0.5, 2.0))))
    return Network.from_links(node_count, links, directed=directed)


@pytest.fixture
def two_node_net():
    return Network.from_links(2, [(0, 1, 1.0)])


@pytest.fixture
def two_cliques():
    """Two disconnected 5-cliques and their ground-truth module ids."""
    net = Network.from_links(10, clique_links(list(range(5))) + clique_links(list(range(5, 10))))
    return net, np.repeat([0, 1], 5)


@pytest.fixture
def rng():
    return np.random.default_rng(123)
