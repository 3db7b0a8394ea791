"""Loop cutsets, opening a network at its cutset, and the associated tree.

A cutset node ``l`` is replaced by copies, one per neighbor when fully
opened.  Copies of the same node may then be re-identified (merged) to join
the pieces of the opened network into a single tree.  Vertices of the
resulting tree keep the original ids of non-cutset nodes; copies get fresh
ids above ``max(V)``.  Every original edge maps to exactly one tree edge.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
from networkx.utils import UnionFind

from .graph import Graph, GraphError, edge_key, is_acyclic, is_connected
from .model import PotentialSet


class CutsetError(ValueError):
    pass


@dataclass(frozen=True)
class LoopCutset:
    """Cutset nodes in ascending id, which is also the agreed ordering."""

    nodes: tuple[int, ...]

    @classmethod
    def of(cls, nodes: Iterable[int]) -> "LoopCutset":
        return cls(tuple(sorted(set(int(n) for n in nodes))))

    def __contains__(self, n) -> bool:
        return n in self.nodes

    def __iter__(self):
        return iter(self.nodes)

    def __len__(self):
        return len(self.nodes)


def verify_loop_cutset(g: Graph, cutset: Iterable[int]) -> bool:
    nodes = set(cutset)
    if not nodes <= g.nodes:
        return False
    return is_acyclic(g.without_nodes(nodes))


def find_loop_cutset(g: Graph) -> LoopCutset:
    """Greedy max-degree removal on the 2-core, then drop redundant nodes."""
    chosen: list[int] = []
    adj = {n: set(g.neighbors(n)) for n in g.nodes}

    def prune():
        leaves = [n for n, nb in adj.items() if len(nb) <= 1]
        while leaves:
            n = leaves.pop()
            if n not in adj:
                continue
            for m in adj.pop(n):
                adj[m].discard(n)
                if len(adj[m]) <= 1:
                    leaves.append(m)

    prune()
    while adj:
        n = max(adj, key=lambda v: (len(adj[v]), -v))
        chosen.append(n)
        for m in adj.pop(n):
            adj[m].discard(n)
        prune()
    result = list(chosen)
    for n in sorted(chosen):
        trial = [m for m in result if m != n]
        if verify_loop_cutset(g, trial):
            result = trial
    return LoopCutset.of(result)


# --- copy networks ----------------------------------------------------------

@dataclass
class CopyNetwork:
    """A network opened at a cutset, with some copies possibly re-identified."""

    graph: Graph
    cutset: LoopCutset
    tree: Graph
    origin: dict[int, int]
    attached: dict[int, frozenset[int]]
    copies: dict[int, tuple[int, ...]]
    merges: list[tuple[int, int, int]] = field(default_factory=list)
    policy: str = "canonical"

    def __post_init__(self):
        self._vertex_for: dict[tuple[int, int], int] = {}
        for v, nbrs in self.attached.items():
            for j in nbrs:
                self._vertex_for[(self.origin[v], j)] = v
        self._edge_origin = {}
        for a, b in self.tree.edges:
            self._edge_origin[(a, b)] = (self.origin[a], self.origin[b])
            self._edge_origin[(b, a)] = (self.origin[b], self.origin[a])

    def is_copy(self, v: int) -> bool:
        return v in self.attached

    def cutset_node_of(self, v: int) -> int | None:
        return self.origin[v] if v in self.attached else None

    def vertex(self, u: int, v: int) -> int:
        """Tree vertex standing for original node ``u`` on original edge ``{u, v}``."""
        if u in self.cutset:
            return self._vertex_for[(u, v)]
        return u

    def tree_edge(self, u: int, v: int) -> tuple[int, int]:
        if not self.graph.has_edge(u, v):
            raise GraphError(f"({u}, {v}) is not an edge of the network")
        return self.vertex(u, v), self.vertex(v, u)

    def original_edge(self, a: int, b: int) -> tuple[int, int]:
        return self._edge_origin[(a, b)]

    def label(self, v: int) -> str:
        if v in self.attached:
            return f"{self.origin[v]}^{{{','.join(str(j) for j in sorted(self.attached[v]))}}}"
        return str(v)

    def leaf_neighbors(self, l: int) -> tuple[int, ...]:
        return tuple(sorted(j for v in self.copies[l] if len(self.attached[v]) == 1 for j in self.attached[v]))

    def nonleaf_neighbors(self, l: int) -> tuple[int, ...]:
        return tuple(sorted(j for v in self.copies[l] if len(self.attached[v]) > 1 for j in self.attached[v]))

    def nonleaf_copy(self, l: int) -> int | None:
        merged = [v for v in self.copies[l] if len(self.attached[v]) > 1]
        return merged[0] if merged else None

    def belief_vertex(self, n: int) -> int:
        """Vertex whose belief is reported for original node ``n``."""
        if n not in self.cutset:
            return n
        merged = self.nonleaf_copy(n)
        if merged is not None:
            return merged
        return self._vertex_for[(n, min(self.leaf_neighbors(n)))]

    def to_json(self) -> dict:
        return {
            "cutset": list(self.cutset.nodes),
            "policy": self.policy,
            "vertices": {str(v): self.label(v) for v in self.tree.sorted_nodes()},
            "tree_edges": [[self.label(a), self.label(b)] for a, b in self.tree.sorted_edges()],
            "merges": [{"node": l, "neighbors": [a, b]} for l, a, b in self.merges],
            "copies": {
                str(l): [sorted(self.attached[v]) for v in self.copies[l]] for l in self.cutset
            },
            "leaf_neighbors": {str(l): list(self.leaf_neighbors(l)) for l in self.cutset},
            "nonleaf_neighbors": {str(l): list(self.nonleaf_neighbors(l)) for l in self.cutset},
        }


class AssociatedTree(CopyNetwork):
    """A connected, acyclic copy network."""


def _check_cutset(g: Graph, cutset: LoopCutset) -> None:
    if not verify_loop_cutset(g, cutset.nodes):
        raise CutsetError(f"{list(cutset.nodes)} is not a loop cutset of the graph")
    for l in cutset:
        if g.degree(l) == 0:
            raise CutsetError(f"cutset node {l} has no neighbors to attach copies to")


def _assemble(cls, g: Graph, cutset: LoopCutset, groups: dict[int, list[frozenset[int]]],
              merges=(), policy="canonical") -> CopyNetwork:
    base = max(g.nodes) + 1
    origin = {n: n for n in g.nodes if n not in cutset}
    attached: dict[int, frozenset[int]] = {}
    copies: dict[int, tuple[int, ...]] = {}
    vertex_for = {}
    next_id = base
    for l in cutset:
        ids = []
        for s in sorted(groups[l], key=min):
            origin[next_id] = l
            attached[next_id] = s
            for j in s:
                vertex_for[(l, j)] = next_id
            ids.append(next_id)
            next_id += 1
        copies[l] = tuple(ids)

    def rep(u, v):
        return vertex_for[(u, v)] if u in cutset else u

    tree = Graph.from_edges(origin, [(rep(u, v), rep(v, u)) for u, v in g.edges])
    return cls(g, cutset, tree, origin, attached, copies, list(merges), policy)


def open_network(g: Graph, cutset: LoopCutset | Iterable[int]) -> CopyNetwork:
    """Replace each cutset node by one leaf copy per neighbor."""
    if not isinstance(cutset, LoopCutset):
        cutset = LoopCutset.of(cutset)
    _check_cutset(g, cutset)
    groups = {l: [frozenset([j]) for j in g.neighbors(l)] for l in cutset}
    return _assemble(CopyNetwork, g, cutset, groups)


MergePolicy = Callable[[list[tuple[int, int, int]], int | None], list[tuple[int, int, int]]]


def _canonical(pairs, seed):
    return sorted(pairs)


def _reverse(pairs, seed):
    return sorted(pairs, key=lambda p: (p[0], -p[1], -p[2]))


def _shuffled(pairs, seed):
    out = sorted(pairs)
    random.Random(seed).shuffle(out)
    return out


MERGE_POLICIES: dict[str, MergePolicy] = {
    "canonical": _canonical,
    "reverse": _reverse,
    "random": _shuffled,
}


def build_associated_tree(g: Graph, cutset: LoopCutset | Iterable[int],
                          policy: str | MergePolicy = "canonical", seed: int | None = None) -> AssociatedTree:
    """Re-identify copies until the opened network is one tree.

    Candidate pairs ``(l, j1, j2)`` are visited in the policy's order and a
    pair is merged only when it joins two different components.  Each cutset
    node ends up with at most one merged (non-leaf) copy.  A final pass in
    canonical order connects anything the policy left apart.
    """
    if not isinstance(cutset, LoopCutset):
        cutset = LoopCutset.of(cutset)
    _check_cutset(g, cutset)
    if not is_connected(g):
        raise GraphError("associated tree requires a connected graph")
    if isinstance(policy, str):
        if policy not in MERGE_POLICIES:
            raise CutsetError(f"unknown merge policy {policy!r}; choose from {sorted(MERGE_POLICIES)}")
        name, order_fn = policy, MERGE_POLICIES[policy]
    else:
        name, order_fn = getattr(policy, "__name__", "custom"), policy

    def rep(u, v):
        return ("c", u, v) if u in cutset else ("n", u)

    comps = UnionFind()
    for u, v in g.sorted_edges():
        comps.union(rep(u, v), rep(v, u))
    group: dict[int, set[int]] = {l: set() for l in cutset}
    merges = []

    def try_merge(l, a, b):
        if comps[rep(l, a)] == comps[rep(l, b)]:
            return False
        if group[l] and a not in group[l] and b not in group[l]:
            return False
        comps.union(rep(l, a), rep(l, b))
        group[l] |= {a, b}
        merges.append((l, min(a, b), max(a, b)))
        return True

    pairs = [(l, a, b) for l in cutset for ai, a in enumerate(g.neighbors(l)) for b in g.neighbors(l)[ai + 1:]]
    for l, a, b in order_fn(pairs, seed):
        try_merge(l, a, b)
    for l in cutset:
        nbrs = g.neighbors(l)
        for j in nbrs:
            anchor = min(group[l]) if group[l] else nbrs[0]
            if j != anchor:
                try_merge(l, anchor, j)

    groups = {}
    for l in cutset:
        merged = frozenset(group[l])
        groups[l] = ([merged] if merged else []) + [frozenset([j]) for j in g.neighbors(l) if j not in merged]
    tree = _assemble(AssociatedTree, g, cutset, groups, merges, name)
    if not (is_acyclic(tree.tree) and is_connected(tree.tree)):
        raise CutsetError("failed to build a connected acyclic associated tree")
    return tree


def trivial_tree(g: Graph) -> AssociatedTree:
    """The associated tree of an acyclic graph with an empty cutset."""
    return build_associated_tree(g, LoopCutset(()))


# --- self potentials of copies ---------------------------------------------

@dataclass(frozen=True)
class SplitPotentials:
    """Exponent and potential per copy vertex; the product over copies is ``Phi_l``."""

    exponents: dict[int, float]
    potentials: dict[int, np.ndarray]
    tree: CopyNetwork = field(repr=False, compare=False)

    def leaf_exponent(self, l: int, j: int) -> float:
        v = self.tree.vertex(l, j)
        if len(self.tree.attached[v]) != 1:
            raise CutsetError(f"{j} is not a leaf neighbor of {l}")
        return self.exponents[v]

    def nonleaf_exponent(self, l: int) -> float | None:
        v = self.tree.nonleaf_copy(l)
        return None if v is None else self.exponents[v]

    def product(self, l: int) -> np.ndarray:
        out = np.ones_like(self.potentials[self.tree.copies[l][0]])
        for v in self.tree.copies[l]:
            out = out * self.potentials[v]
        return out


def split_self_potentials(pots: PotentialSet, t: CopyNetwork) -> SplitPotentials:
    """Equal exponents: each of the ``k`` copies of ``l`` gets ``Phi_l ** (1/k)``."""
    exps, split = {}, {}
    for l in t.cutset:
        k = len(t.copies[l])
        for v in t.copies[l]:
            exps[v] = 1.0 / k
            split[v] = pots.phi(l) ** (1.0 / k)
    return SplitPotentials(exps, split, t)


def condition_split_potential(phi: np.ndarray, x_l: int) -> np.ndarray:
    """Keep entry ``x_l`` (an alphabet index), zero every other entry."""
    phi = np.asarray(phi, dtype=float)
    if not 0 <= x_l < len(phi):
        raise CutsetError(f"value index {x_l} outside alphabet of size {len(phi)}")
    out = np.zeros_like(phi)
    out[x_l] = phi[x_l]
    return out


def vertex_potentials(pots: PotentialSet, t: CopyNetwork, split: SplitPotentials | None = None) -> dict[int, np.ndarray]:
    """Unconditioned self potential of every tree vertex."""
    split = split if split is not None else split_self_potentials(pots, t)
    return {v: (split.potentials[v] if t.is_copy(v) else pots.phi(v)) for v in t.tree.nodes}


def edge_key_of(u: int, v: int) -> str:
    i, j = edge_key(u, v)
    return f"{i}-{j}"
