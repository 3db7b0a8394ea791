import itertools

import networkx as nx
import numpy as np
import pytest

from localcond.cutset import build_associated_tree
from localcond.graph import Graph, build_grid
from localcond.model import golden_model, random_ising


@pytest.fixture
def grid3():
    return build_grid(3, 3)


@pytest.fixture
def golden():
    return golden_model()


@pytest.fixture
def golden_tree(golden):
    return build_associated_tree(golden.graph, (4, 6, 8))


def random_connected_graph(rng: np.random.Generator, n_nodes: int, extra_edges: int) -> Graph:
    """Random spanning tree on nodes 1..n plus ``extra_edges`` chords."""
    nodes = list(range(1, n_nodes + 1))
    edges = set()
    for k in range(1, n_nodes):
        parent = nodes[int(rng.integers(0, k))]
        edges.add((min(parent, nodes[k]), max(parent, nodes[k])))
    missing = [e for e in itertools.combinations(nodes, 2) if e not in edges]
    rng.shuffle(missing)
    edges.update(missing[:extra_edges])
    return Graph.from_edges(nodes, edges)


def cyclic_corpus(seed: int, count: int, max_nodes: int = 9):
    """Connected graphs with at least one cycle and Ising parameters."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        n = int(rng.integers(3, max_nodes + 1))
        max_extra = n * (n - 1) // 2 - (n - 1)
        g = random_connected_graph(rng, n, int(rng.integers(1, min(max_extra, n) + 1)))
        assert nx.is_connected(g.to_networkx())
        out.append(random_ising(g, rng, scale=1.0))
    return out


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
