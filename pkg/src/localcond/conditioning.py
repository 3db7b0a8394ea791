"""Global Conditioning in parallel (matrix) form on an associated tree.

Each message is a ``|X| x |X|**|L|`` matrix whose column ``c`` is the message
conditioned on the cutset configuration whose ``|L|``-digit ``|X|``-ary
representation is ``c`` (first node of the ordering = most significant digit).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from . import kernels
from .cutset import CopyNetwork, SplitPotentials, split_self_potentials, vertex_potentials
from .graph import GraphError
from .model import BeliefVector, PotentialSet, marginal
from .treebp import MissingMessageError, fuse, make_schedule, propagate, rescale


class ColumnCountError(ValueError):
    pass


@dataclass(frozen=True)
class ColumnOrdering:
    nodes: tuple[int, ...]
    radix: int

    @property
    def n_columns(self) -> int:
        return self.radix ** len(self.nodes)

    def digits(self) -> np.ndarray:
        """``(n_columns, len(nodes))`` array of every column's digits."""
        n = len(self.nodes)
        idx = np.arange(self.n_columns, dtype=np.int64)
        weights = self.radix ** np.arange(n - 1, -1, -1, dtype=np.int64)
        return (idx[:, None] // weights[None, :]) % self.radix

    def digit_of(self, node: int) -> np.ndarray:
        return self.digits()[:, self.nodes.index(node)]

    def index(self, config: Mapping[int, int]) -> int:
        c = 0
        for n in self.nodes:
            c = c * self.radix + int(config[n])
        return c


@dataclass
class MessageMatrix:
    sender: int
    receiver: int
    ordering: ColumnOrdering
    values: np.ndarray
    log_scale: float = 0.0

    def __post_init__(self):
        if self.values.shape != (self.ordering.radix, self.ordering.n_columns):
            raise ColumnCountError(
                f"message {self.sender}->{self.receiver}: shape {self.values.shape} does not match "
                f"ordering {self.ordering.nodes} over radix {self.ordering.radix}"
            )

    @property
    def n_columns(self) -> int:
        return self.values.shape[1]


@dataclass
class BeliefMatrix:
    node: int
    ordering: ColumnOrdering
    values: np.ndarray
    log_scale: float = 0.0


def conditioned_potential(phi: np.ndarray, ordering: ColumnOrdering, cutset_node: int | None) -> np.ndarray:
    """Self potential repeated per column; for a copy of ``l`` only row ``x_l`` survives."""
    cols = np.repeat(np.asarray(phi, dtype=np.float64)[:, None], ordering.n_columns, axis=1)
    if cutset_node is not None:
        x_l = ordering.digit_of(cutset_node)
        cols[np.arange(ordering.radix)[:, None] != x_l[None, :]] = 0.0
    return cols


def _incoming(incoming: Mapping[int, MessageMatrix], senders: Sequence[int], target: int):
    missing = [k for k in senders if k not in incoming]
    if missing:
        raise MissingMessageError(f"missing message matrices into {target} from {missing}")
    return [incoming[k] for k in sorted(senders)]


def conditioned_message(sender: int, receiver: int, incoming: Mapping[int, MessageMatrix],
                        t: CopyNetwork, pots: PotentialSet, split: SplitPotentials,
                        ordering: ColumnOrdering, rescale_messages: bool = True) -> MessageMatrix:
    senders = [k for k in t.tree.neighbors(sender) if k != receiver]
    msgs = _incoming(incoming, senders, sender)
    for m in msgs:
        if m.ordering != ordering:
            raise ColumnCountError(
                f"message {m.sender}->{m.receiver} is conditioned on {m.ordering.nodes}, expected {ordering.nodes}"
            )
    phi = split.potentials[sender] if t.is_copy(sender) else pots.phi(sender)
    base = conditioned_potential(phi, ordering, t.cutset_node_of(sender))
    fused = fuse(base, [m.values for m in msgs])
    values = propagate(pots.psi(t.origin[receiver], t.origin[sender]), fused)
    values, log_scale = rescale(values, float(sum(m.log_scale for m in msgs)), rescale_messages)
    return MessageMatrix(sender, receiver, ordering, values, log_scale)


def conditioned_belief(vertex: int, incoming: Mapping[int, MessageMatrix], t: CopyNetwork,
                       pots: PotentialSet, split: SplitPotentials, ordering: ColumnOrdering) -> BeliefMatrix:
    msgs = _incoming(incoming, t.tree.neighbors(vertex), vertex)
    phi = split.potentials[vertex] if t.is_copy(vertex) else pots.phi(vertex)
    base = conditioned_potential(phi, ordering, t.cutset_node_of(vertex))
    fused = fuse(base, [m.values for m in msgs])
    return BeliefMatrix(t.origin[vertex], ordering, fused, float(sum(m.log_scale for m in msgs)))


def combine_beliefs(zb: BeliefMatrix) -> BeliefVector:
    """Sum all columns."""
    cols = zb.values.shape[1]
    summed = kernels.sum_groups(zb.values, np.arange(cols, dtype=np.int64)[:, None])
    return BeliefVector(zb.node, summed[:, 0], zb.log_scale)


@dataclass
class ConditioningResult:
    messages: dict[tuple[int, int], MessageMatrix]
    beliefs: dict[int, BeliefMatrix]
    marginals: dict[int, np.ndarray]
    tree: CopyNetwork


Perturb = Callable[[tuple[int, int], MessageMatrix], MessageMatrix]


def run_conditioning(g, pots: PotentialSet, t: CopyNetwork, split: SplitPotentials | None = None,
                     rescale_messages: bool = True, perturb: Perturb | None = None) -> ConditioningResult:
    """All node marginals by parallel Conditioning on associated tree ``t``.

    ``perturb`` may replace each message right after it is computed; it is a
    test hook for checking invariance to message scaling.
    """
    if t.graph is not g and t.graph != g:
        raise GraphError("associated tree was built for a different graph")
    pots.check_covers(g)
    split = split if split is not None else split_self_potentials(pots, t)
    ordering = ColumnOrdering(t.cutset.nodes, pots.alphabet_size)
    messages: dict[tuple[int, int], MessageMatrix] = {}
    for j, i in make_schedule(t.tree):
        incoming = {k: messages[(k, j)] for k in t.tree.neighbors(j) if k != i}
        m = conditioned_message(j, i, incoming, t, pots, split, ordering, rescale_messages)
        messages[(j, i)] = perturb((j, i), m) if perturb is not None else m
    beliefs, marginals = {}, {}
    for n in g.sorted_nodes():
        v = t.belief_vertex(n)
        zb = conditioned_belief(v, {k: messages[(k, v)] for k in t.tree.neighbors(v)}, t, pots, split, ordering)
        beliefs[n] = zb
        marginals[n] = marginal(combine_beliefs(zb))
    return ConditioningResult(messages, beliefs, marginals, t)


def run_conditioning_serial(pots: PotentialSet, t: CopyNetwork, split: SplitPotentials | None = None
                            ) -> dict[tuple[int, ...], dict[tuple[int, int], np.ndarray]]:
    """Unscaled scalar BP once per cutset configuration.

    Returns ``{x_L: {(j, i): message vector}}``.  This is the serial form of
    Conditioning, used to check the parallel implementation column by column.
    """
    split = split if split is not None else split_self_potentials(pots, t)
    phis = vertex_potentials(pots, t, split)
    q = pots.alphabet_size
    schedule = make_schedule(t.tree)
    out = {}
    for config in itertools.product(range(q), repeat=len(t.cutset)):
        value = dict(zip(t.cutset.nodes, config))
        msgs: dict[tuple[int, int], np.ndarray] = {}
        for j, i in schedule:
            phi = phis[j].copy()
            if t.is_copy(j):
                keep = value[t.origin[j]]
                phi[np.arange(q) != keep] = 0.0
            f = phi
            for k in sorted(t.tree.neighbors(j)):
                if k != i:
                    f = f * msgs[(k, j)]
            psi = pots.psi(t.origin[i], t.origin[j])
            msgs[(j, i)] = psi @ f
        out[config] = msgs
    return out
