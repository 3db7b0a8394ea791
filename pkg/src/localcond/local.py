"""Local Conditioning: messages conditioned only on each edge's relevant cutset nodes.

A message over tree edge ``{i, j}`` carries one column per configuration of
``R_ij``, the cutset nodes with copies on both sides of the edge.  A node
aligns its incoming matrices by *expanding* them to a common node set and
*reordering* their columns, fuses them with its self potential, then *sums
out* the cutset nodes that are irrelevant to the outgoing edge.

Every relevant set is kept in ascending node order.  Expansion prepends the
added nodes (ascending) as the most significant digits, which is then undone
by a reorder to ascending order.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from . import kernels
from .conditioning import (
    BeliefMatrix,
    ColumnOrdering,
    MessageMatrix,
    Perturb,
    _incoming,
    conditioned_potential,
)
from .cutset import CopyNetwork, SplitPotentials, edge_key_of, split_self_potentials
from .graph import GraphError
from .model import BeliefVector, PotentialSet, marginal
from .treebp import fuse, make_schedule, propagate, rescale


class RelevantSetError(ValueError):
    pass


@dataclass(frozen=True)
class RelevantSets:
    """Relevant and upstream cutset sets of an associated tree.

    Keys are tree vertices.  ``upstream[(j, i)]`` holds the cutset nodes all
    of whose copies lie on ``j``'s side of edge ``{i, j}``.
    """

    cutset: tuple[int, ...]
    upstream: dict[tuple[int, int], frozenset[int]]
    edge: dict[tuple[int, int], frozenset[int]]
    node: dict[int, frozenset[int]]
    sum_out: dict[tuple[int, int], frozenset[int]]

    def edge_set(self, i: int, j: int) -> frozenset[int]:
        return self.edge[(i, j) if i < j else (j, i)]

    def ordering(self, i: int, j: int, radix: int) -> ColumnOrdering:
        return ColumnOrdering(tuple(sorted(self.edge_set(i, j))), radix)

    def partitions(self, i: int, neighbors: Iterable[int]) -> bool:
        """Whether ``R_i`` and the upstream sets of ``i``'s incoming edges partition L."""
        parts = [self.node[i]] + [self.upstream[(j, i)] for j in neighbors]
        seen: set[int] = set()
        for p in parts:
            if seen & p:
                return False
            seen |= p
        return seen == set(self.cutset)


def compute_relevant_sets(t: CopyNetwork, cutset: Iterable[int] | None = None) -> RelevantSets:
    cut = tuple(sorted(cutset)) if cutset is not None else t.cutset.nodes
    if set(cut) != set(t.cutset.nodes):
        raise RelevantSetError("cutset does not match the associated tree")
    tree = t.tree
    total = Counter({l: len(t.copies[l]) for l in cut})
    upstream: dict[tuple[int, int], frozenset[int]] = {}
    if tree.nodes:
        root = min(tree.nodes)
        parent = {root: None}
        order = [root]
        for u in order:
            for v in tree.neighbors(u):
                if v not in parent:
                    parent[v] = u
                    order.append(v)
        # copies per subtree, accumulated leaves first
        below: dict[int, Counter] = {}
        for v in reversed(order):
            c = Counter()
            l = t.cutset_node_of(v)
            if l is not None:
                c[l] += 1
            for w in tree.neighbors(v):
                if w != parent[v]:
                    c.update(below[w])
            below[v] = c
            p = parent[v]
            if p is not None:
                upstream[(v, p)] = frozenset(l for l in cut if c[l] == total[l])
                upstream[(p, v)] = frozenset(l for l in cut if c[l] == 0)
    edge = {}
    for i, j in tree.edges:
        edge[(i, j)] = frozenset(cut) - upstream[(i, j)] - upstream[(j, i)]
    node = {}
    for i in tree.nodes:
        acc = frozenset()
        for j in tree.neighbors(i):
            acc |= edge[(min(i, j), max(i, j))]
        node[i] = acc
    sum_out = {}
    for j, i in upstream:
        rel = frozenset()
        for k in tree.neighbors(j):
            if k != i:
                rel |= edge[(min(k, j), max(k, j))]
        sum_out[(j, i)] = rel - edge[(min(i, j), max(i, j))]
    return RelevantSets(cut, upstream, edge, node, sum_out)


# --- column algebra ---------------------------------------------------------

@dataclass(frozen=True)
class PermutationMap:
    """Digit permutation taking columns ordered by ``source`` to ``target``.

    ``perm[k]`` is the position in ``source`` of ``target[k]``; ``index[c]``
    is where source column ``c`` lands.
    """

    source: tuple[int, ...]
    target: tuple[int, ...]
    perm: tuple[int, ...]
    index: np.ndarray

    def matrix(self) -> np.ndarray:
        """0/1 matrix mapping a source digit vector to the target digit vector."""
        n = len(self.perm)
        p = np.zeros((n, n), dtype=int)
        for k, s in enumerate(self.perm):
            p[k, s] = 1
        return p

    def inverse(self, radix: int) -> "PermutationMap":
        return permutation_map(self.target, self.source, radix)


def permutation_map(source: Iterable[int], target: Iterable[int], radix: int) -> PermutationMap:
    source, target = tuple(source), tuple(target)
    if sorted(source) != sorted(target) or len(set(source)) != len(source):
        raise RelevantSetError(f"{target} is not a permutation of {source}")
    perm = tuple(source.index(n) for n in target)
    return PermutationMap(source, target, perm, kernels.digit_permutation(len(perm), radix, perm))


def expand(m: MessageMatrix, target: Iterable[int]) -> MessageMatrix:
    """Replicate columns so the matrix is conditioned on ``target`` as well."""
    target = set(target)
    have = m.ordering.nodes
    if not set(have) <= target:
        raise RelevantSetError(f"{sorted(have)} is not a subset of {sorted(target)}")
    added = tuple(sorted(target - set(have)))
    if not added:
        return m
    radix = m.ordering.radix
    ordering = ColumnOrdering(added + have, radix)
    values = np.tile(m.values, (1, radix ** len(added)))
    return MessageMatrix(m.sender, m.receiver, ordering, values, m.log_scale)


def reorder(m: MessageMatrix, target: ColumnOrdering | Iterable[int]) -> MessageMatrix:
    target_nodes = target.nodes if isinstance(target, ColumnOrdering) else tuple(target)
    if target_nodes == m.ordering.nodes:
        return m
    pm = permutation_map(m.ordering.nodes, target_nodes, m.ordering.radix)
    values = np.empty_like(m.values)
    values[:, pm.index] = m.values
    return MessageMatrix(m.sender, m.receiver, ColumnOrdering(target_nodes, m.ordering.radix), values, m.log_scale)


def _sum_out_groups(ordering: ColumnOrdering, drop: Iterable[int]):
    drop = set(drop)
    nodes = ordering.nodes
    keep_pos = [k for k, n in enumerate(nodes) if n not in drop]
    drop_pos = [k for k, n in enumerate(nodes) if n in drop]
    r = ordering.radix
    digits = ordering.digits()
    kw = r ** np.arange(len(keep_pos) - 1, -1, -1, dtype=np.int64)
    dw = r ** np.arange(len(drop_pos) - 1, -1, -1, dtype=np.int64)
    kept_idx = digits[:, keep_pos] @ kw if keep_pos else np.zeros(len(digits), dtype=np.int64)
    drop_idx = digits[:, drop_pos] @ dw if drop_pos else np.zeros(len(digits), dtype=np.int64)
    groups = np.empty((r ** len(drop_pos), r ** len(keep_pos)), dtype=np.int64)
    groups[drop_idx, kept_idx] = np.arange(len(digits), dtype=np.int64)
    return tuple(nodes[k] for k in keep_pos), groups


def sum_out(m: MessageMatrix, drop: Iterable[int]) -> MessageMatrix:
    """Add columns that agree on every node outside ``drop``."""
    drop = set(drop)
    if not drop <= set(m.ordering.nodes):
        raise RelevantSetError(f"{sorted(drop - set(m.ordering.nodes))} not in conditioning {m.ordering.nodes}")
    if not drop:
        return m
    kept, groups = _sum_out_groups(m.ordering, drop)
    values = kernels.sum_groups(m.values, groups)
    return MessageMatrix(m.sender, m.receiver, ColumnOrdering(kept, m.ordering.radix), values, m.log_scale)


def summation_matrix(ordering: ColumnOrdering, drop: Iterable[int]) -> np.ndarray:
    """The 0/1 matrix ``S`` with ``sum_out(M, drop).values == M.values @ S``."""
    _, groups = _sum_out_groups(ordering, drop)
    s = np.zeros((ordering.n_columns, groups.shape[1]))
    for g in groups:
        s[g, np.arange(groups.shape[1])] = 1.0
    return s


# --- messages and beliefs ---------------------------------------------------

def _working_set(v: int, senders, t: CopyNetwork, rs: RelevantSets) -> tuple[int, ...]:
    work = set()
    for k in senders:
        work |= rs.edge_set(k, v)
    l = t.cutset_node_of(v)
    if l is not None:
        work.add(l)
    return tuple(sorted(work))


def fuse_incoming(phi: np.ndarray, cutset_node: int | None, msgs, expected, radix: int
                  ) -> tuple[ColumnOrdering, np.ndarray]:
    """Expand and reorder ``msgs`` to a common node set and fuse them with ``phi``.

    ``msgs`` must already be sorted by sender; ``expected[k]`` is the ascending
    relevant set ``msgs[k]`` has to be conditioned on.  For a copy of cutset
    node ``l`` the potential is zeroed off ``x_l`` in every column.
    """
    work = set()
    for m, exp in zip(msgs, expected):
        if m.ordering.nodes != tuple(exp):
            raise RelevantSetError(
                f"message {m.sender}->{m.receiver} is conditioned on {m.ordering.nodes}, expected {tuple(exp)}"
            )
        work |= set(exp)
    if cutset_node is not None:
        work.add(cutset_node)
    work = tuple(sorted(work))
    ordering = ColumnOrdering(work, radix)
    base = conditioned_potential(phi, ordering, cutset_node)
    return ordering, fuse(base, [reorder(expand(m, work), work).values for m in msgs])


def outgoing_message(sender: int, receiver: int, ordering: ColumnOrdering, fused: np.ndarray,
                     out_nodes, psi: np.ndarray, log_scale: float,
                     rescale_messages: bool = True) -> MessageMatrix:
    """Sum out everything but ``out_nodes``, then propagate through ``psi``."""
    out_nodes = tuple(sorted(out_nodes))
    if not set(out_nodes) <= set(ordering.nodes):
        raise RelevantSetError(f"R for edge ({sender}, {receiver}) = {out_nodes} not covered by {ordering.nodes}")
    summed = sum_out(MessageMatrix(sender, receiver, ordering, fused), set(ordering.nodes) - set(out_nodes))
    values = propagate(psi, summed.values)
    values, log_scale = rescale(values, log_scale, rescale_messages)
    return MessageMatrix(sender, receiver, summed.ordering, values, log_scale)


def sum_columns(values: np.ndarray) -> np.ndarray:
    cols = values.shape[1]
    return kernels.sum_groups(values, np.arange(cols, dtype=np.int64)[:, None])[:, 0]


def _vertex_phi(v, t, pots, split):
    return split.potentials[v] if t.is_copy(v) else pots.phi(v)


def lc_message(j: int, i: int, incoming: Mapping[int, MessageMatrix], t: CopyNetwork,
               pots: PotentialSet, split: SplitPotentials, rs: RelevantSets,
               rescale_messages: bool = True) -> MessageMatrix:
    """Message matrix from tree vertex ``j`` to ``i``, conditioned on ``R_ij``."""
    msgs = _incoming(incoming, [k for k in t.tree.neighbors(j) if k != i], j)
    ordering, fused = fuse_incoming(_vertex_phi(j, t, pots, split), t.cutset_node_of(j), msgs,
                                    [sorted(rs.edge_set(m.sender, j)) for m in msgs], pots.alphabet_size)
    return outgoing_message(j, i, ordering, fused, rs.edge_set(i, j), pots.psi(t.origin[i], t.origin[j]),
                            float(sum(m.log_scale for m in msgs)), rescale_messages)


def lc_belief_matrix(v: int, incoming: Mapping[int, MessageMatrix], t: CopyNetwork,
                     pots: PotentialSet, split: SplitPotentials, rs: RelevantSets) -> BeliefMatrix:
    msgs = _incoming(incoming, t.tree.neighbors(v), v)
    ordering, fused = fuse_incoming(_vertex_phi(v, t, pots, split), t.cutset_node_of(v), msgs,
                                    [sorted(rs.edge_set(m.sender, v)) for m in msgs], pots.alphabet_size)
    return BeliefMatrix(t.origin[v], ordering, fused, float(sum(m.log_scale for m in msgs)))


def lc_belief(v: int, incoming: Mapping[int, MessageMatrix], t: CopyNetwork,
              pots: PotentialSet, split: SplitPotentials, rs: RelevantSets) -> BeliefVector:
    zb = lc_belief_matrix(v, incoming, t, pots, split, rs)
    return BeliefVector(zb.node, sum_columns(zb.values), zb.log_scale)


# --- full run ---------------------------------------------------------------

@dataclass
class LCResult:
    messages: dict[tuple[int, int], MessageMatrix]
    beliefs: dict[int, BeliefVector]
    marginals: dict[int, np.ndarray]
    report: dict
    tree: CopyNetwork
    relevant: RelevantSets


def complexity_report(t: CopyNetwork, rs: RelevantSets, radix: int) -> dict:
    """Relevant-set sizes and the scalar multiplications one LC run performs."""
    edge_rel, edge_cols = {}, {}
    for a, b in t.tree.sorted_edges():
        key = edge_key_of(*t.original_edge(a, b))
        edge_rel[key] = len(rs.edge_set(a, b))
        edge_cols[key] = radix ** edge_rel[key]
    node_rel = {t.label(v): len(rs.node[v]) for v in t.tree.sorted_nodes()}
    mults = 0
    for v in t.tree.nodes:
        nbrs = t.tree.neighbors(v)
        for i in nbrs:
            senders = [k for k in nbrs if k != i]
            work = _working_set(v, senders, t, rs)
            mults += radix * radix ** len(work) * len(senders)
            mults += radix * radix * radix ** len(rs.edge_set(i, v))
    for n in t.graph.nodes:
        v = t.belief_vertex(n)
        work = _working_set(v, t.tree.neighbors(v), t, rs)
        mults += radix * radix ** len(work) * len(t.tree.neighbors(v))
    return {
        "max_node_relevant": max(node_rel.values(), default=0),
        "node_relevant": node_rel,
        "edge_relevant": edge_rel,
        "edge_columns": edge_cols,
        "multiplies": int(mults),
    }


def best_associated_tree(g, cutset, seeds: Iterable[int] = range(64)) -> tuple[CopyNetwork, int]:
    """Smallest ``max_i |R_i|`` over the named merge policies and seeded random orders."""
    from .cutset import build_associated_tree

    candidates = [("canonical", None), ("reverse", None)] + [("random", s) for s in seeds]
    best = None
    for policy, seed in candidates:
        t = build_associated_tree(g, cutset, policy, seed)
        rs = compute_relevant_sets(t)
        size = max((len(r) for r in rs.node.values()), default=0)
        if best is None or size < best[1]:
            best = (t, size)
    return best


def run_local_conditioning(g, pots: PotentialSet, t: CopyNetwork, cutset=None,
                           split: SplitPotentials | None = None, rs: RelevantSets | None = None,
                           rescale_messages: bool = True, perturb: Perturb | None = None) -> LCResult:
    if t.graph is not g and t.graph != g:
        raise GraphError("associated tree was built for a different graph")
    pots.check_covers(g)
    split = split if split is not None else split_self_potentials(pots, t)
    rs = rs if rs is not None else compute_relevant_sets(t, cutset)
    messages: dict[tuple[int, int], MessageMatrix] = {}
    for j, i in make_schedule(t.tree):
        incoming = {k: messages[(k, j)] for k in t.tree.neighbors(j) if k != i}
        m = lc_message(j, i, incoming, t, pots, split, rs, rescale_messages)
        messages[(j, i)] = perturb((j, i), m) if perturb is not None else m
    beliefs, marginals = {}, {}
    for n in g.sorted_nodes():
        v = t.belief_vertex(n)
        beliefs[n] = lc_belief(v, {k: messages[(k, v)] for k in t.tree.neighbors(v)}, t, pots, split, rs)
        marginals[n] = marginal(beliefs[n])
    return LCResult(messages, beliefs, marginals, complexity_report(t, rs, pots.alphabet_size), t, rs)
