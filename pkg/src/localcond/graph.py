"""Undirected graphs: construction, traversal, cycles and grid generators."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

import networkx as nx


class GraphError(ValueError):
    pass


def edge_key(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on integer node ids.

    Edges are stored once as ``(min, max)`` pairs; ``adjacency`` maps every
    node to its ascending neighbor tuple.
    """

    nodes: frozenset[int]
    edges: frozenset[tuple[int, int]]
    adjacency: dict[int, tuple[int, ...]] = field(compare=False, repr=False)

    @classmethod
    def from_edges(cls, nodes: Iterable[int], edges: Iterable[tuple[int, int]]) -> "Graph":
        node_set = frozenset(int(n) for n in nodes)
        edge_set = set()
        for i, j in edges:
            i, j = int(i), int(j)
            if i == j:
                raise GraphError(f"self-loop at node {i}")
            if i not in node_set or j not in node_set:
                raise GraphError(f"edge ({i}, {j}) references an unknown node")
            edge_set.add(edge_key(i, j))
        nbrs: dict[int, list[int]] = {n: [] for n in node_set}
        for i, j in edge_set:
            nbrs[i].append(j)
            nbrs[j].append(i)
        adjacency = {n: tuple(sorted(v)) for n, v in nbrs.items()}
        return cls(node_set, frozenset(edge_set), adjacency)

    def neighbors(self, i: int) -> tuple[int, ...]:
        return self.adjacency[i]

    def has_edge(self, i: int, j: int) -> bool:
        return edge_key(i, j) in self.edges

    def sorted_nodes(self) -> list[int]:
        return sorted(self.nodes)

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def degree(self, i: int) -> int:
        return len(self.adjacency[i])

    def without_nodes(self, removed: Iterable[int]) -> "Graph":
        removed = set(removed)
        keep = [n for n in self.nodes if n not in removed]
        return Graph.from_edges(keep, [e for e in self.edges if e[0] not in removed and e[1] not in removed])

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(self.sorted_nodes())
        g.add_edges_from(self.sorted_edges())
        return g

    def to_json(self) -> dict:
        return {"nodes": self.sorted_nodes(), "edges": [list(e) for e in self.sorted_edges()]}

    @classmethod
    def from_json(cls, data: dict) -> "Graph":
        try:
            return cls.from_edges(data["nodes"], [tuple(e) for e in data["edges"]])
        except (KeyError, TypeError) as exc:
            raise GraphError(f"malformed graph JSON: {exc}") from exc


@dataclass(frozen=True)
class Subtree:
    """The component of ``G`` minus edge ``{root, excluded}`` that contains ``root``."""

    root: int
    excluded: int
    members: frozenset[int]


def build_grid(rows: int, cols: int) -> Graph:
    """Grid graph numbered row-major from 1, so node ``r*cols + c + 1``."""
    if rows < 1 or cols < 1:
        raise GraphError("grid dimensions must be positive")
    nodes = range(1, rows * cols + 1)
    edges = []
    for r in range(rows):
        for c in range(cols):
            k = r * cols + c + 1
            if c + 1 < cols:
                edges.append((k, k + 1))
            if r + 1 < rows:
                edges.append((k, k + cols))
    return Graph.from_edges(nodes, edges)


def connected_components(g: Graph) -> list[frozenset[int]]:
    seen: set[int] = set()
    comps = []
    for start in g.sorted_nodes():
        if start in seen:
            continue
        comp = {start}
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in g.adjacency[u]:
                if v not in comp:
                    comp.add(v)
                    queue.append(v)
        seen |= comp
        comps.append(frozenset(comp))
    return comps


def is_connected(g: Graph) -> bool:
    return len(connected_components(g)) <= 1


def is_acyclic(g: Graph) -> bool:
    # a forest has exactly |V| - (#components) edges
    return len(g.edges) == len(g.nodes) - len(connected_components(g))


def component_of(g: Graph, i: int, excluded_edge: tuple[int, int]) -> Subtree:
    a, b = excluded_edge
    if not g.has_edge(a, b):
        raise GraphError(f"edge {excluded_edge} not in graph")
    if i not in (a, b):
        raise GraphError(f"node {i} is not an endpoint of {excluded_edge}")
    j = b if i == a else a
    members = {i}
    queue = deque([i])
    while queue:
        u = queue.popleft()
        for v in g.adjacency[u]:
            if (u, v) in ((i, j), (j, i)) or v in members:
                continue
            members.add(v)
            queue.append(v)
    return Subtree(root=i, excluded=j, members=frozenset(members))


def find_cycles_basis(g: Graph) -> list[list[int]]:
    """Fundamental cycles with respect to a spanning forest."""
    return [list(c) for c in nx.cycle_basis(g.to_networkx())]


def load_graph(path) -> Graph:
    with open(path) as fh:
        return Graph.from_json(json.load(fh))
