"""Simulated distributed Local Conditioning.

One actor per original node.  A cutset node's actor owns all of its copies.
Setup (cutset, associated tree, relevant sets) happens centrally; afterwards
each actor works only from its local view and the wire messages it receives.
"""

from __future__ import annotations

import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .conditioning import ColumnOrdering, MessageMatrix
from .cutset import CopyNetwork, SplitPotentials, split_self_potentials
from .local import RelevantSets, compute_relevant_sets, fuse_incoming, outgoing_message, sum_columns
from .model import PotentialSet, marginal


class LocalityError(ValueError):
    pass


class WireError(ValueError):
    pass


class DeadlockError(RuntimeError):
    pass


@dataclass(frozen=True)
class WireMessage:
    """Self-describing message matrix between original nodes."""

    sender: int
    receiver: int
    ordering: tuple[int, ...]
    rows: int
    cols: int
    values: tuple[float, ...]
    log_scale: float

    @classmethod
    def from_matrix(cls, sender: int, receiver: int, m: MessageMatrix) -> "WireMessage":
        rows, cols = m.values.shape
        return cls(sender, receiver, tuple(m.ordering.nodes), rows, cols,
                   tuple(float(x) for x in m.values.ravel()), float(m.log_scale))

    def array(self) -> np.ndarray:
        return np.array(self.values, dtype=np.float64).reshape(self.rows, self.cols)

    def to_json(self) -> dict:
        return {"from": self.sender, "to": self.receiver, "ordering": list(self.ordering),
                "rows": self.rows, "cols": self.cols, "values": list(self.values),
                "log_scale": self.log_scale}

    @classmethod
    def from_json(cls, d: dict) -> "WireMessage":
        return cls(int(d["from"]), int(d["to"]), tuple(d["ordering"]), int(d["rows"]), int(d["cols"]),
                   tuple(float(x) for x in d["values"]), float(d["log_scale"]))


@dataclass
class VertexView:
    """What an actor knows about one of its tree vertices."""

    vertex: int
    phi: np.ndarray
    is_copy: bool
    # tree neighbors as (neighbor vertex, neighbor's original node), ascending by vertex
    neighbors: tuple[tuple[int, int], ...]
    # psi oriented [x_neighbor, x_self], keyed by neighbor node
    psi: dict[int, np.ndarray]
    # ascending relevant set per incident edge, keyed by neighbor node
    relevant: dict[int, tuple[int, ...]]
    relevant_node: tuple[int, ...]
    sum_out: dict[int, tuple[int, ...]]


@dataclass
class NodeActor:
    node: int
    radix: int
    vertices: dict[int, VertexView]
    belief_vertex: int
    inbox: dict[int, WireMessage] = field(default_factory=dict)
    sent: set[int] = field(default_factory=set)

    def vertex_for(self, neighbor: int) -> VertexView:
        for view in self.vertices.values():
            if any(n == neighbor for _, n in view.neighbors):
                return view
        raise WireError(f"actor {self.node} has no edge to {neighbor}")

    def receive(self, msg: WireMessage) -> None:
        if msg.receiver != self.node:
            raise WireError(f"message for {msg.receiver} delivered to {self.node}")
        view = self.vertex_for(msg.sender)
        expected = view.relevant[msg.sender]
        if msg.ordering != expected:
            raise WireError(f"message {msg.sender}->{self.node} conditioned on {msg.ordering}, expected {expected}")
        if msg.rows != self.radix or msg.cols != self.radix ** len(expected):
            raise WireError(f"message {msg.sender}->{self.node} has shape {msg.rows}x{msg.cols}")
        if msg.sender in self.inbox:
            raise WireError(f"duplicate message {msg.sender}->{self.node}")
        self.inbox[msg.sender] = msg

    def _matrices(self, view: VertexView, senders):
        out = []
        for vert, n in view.neighbors:
            if n in senders:
                w = self.inbox[n]
                out.append(MessageMatrix(vert, view.vertex, ColumnOrdering(w.ordering, self.radix), w.array(), w.log_scale))
        return out

    def ready(self) -> list[int]:
        """Neighbors this actor can send to now."""
        out = []
        for view in self.vertices.values():
            for _, n in view.neighbors:
                if n in self.sent:
                    continue
                if all(k in self.inbox for _, k in view.neighbors if k != n):
                    out.append(n)
        return sorted(out)

    def compute(self, neighbor: int, rescale_messages: bool = True) -> WireMessage:
        view = self.vertex_for(neighbor)
        senders = {k for _, k in view.neighbors if k != neighbor}
        msgs = self._matrices(view, senders)
        cut = self.node if view.is_copy else None
        nodes_of = {vert: n for vert, n in view.neighbors}
        ordering, fused = fuse_incoming(view.phi, cut, msgs, [view.relevant[nodes_of[m.sender]] for m in msgs],
                                        self.radix)
        target = next(vert for vert, n in view.neighbors if n == neighbor)
        m = outgoing_message(view.vertex, target, ordering, fused, view.relevant[neighbor], view.psi[neighbor],
                             float(sum(x.log_scale for x in msgs)), rescale_messages)
        return WireMessage.from_matrix(self.node, neighbor, m)

    def complete(self) -> bool:
        return all(n in self.inbox for view in self.vertices.values() for _, n in view.neighbors)

    def local_marginal(self) -> np.ndarray:
        view = self.vertices[self.belief_vertex]
        msgs = self._matrices(view, {n for _, n in view.neighbors})
        cut = self.node if view.is_copy else None
        nodes_of = {vert: n for vert, n in view.neighbors}
        _, fused = fuse_incoming(view.phi, cut, msgs, [view.relevant[nodes_of[m.sender]] for m in msgs], self.radix)
        return marginal(sum_columns(fused))


def setup_actors(g, pots: PotentialSet, t: CopyNetwork, rs: RelevantSets | None = None,
                 split: SplitPotentials | None = None) -> dict[int, NodeActor]:
    """Give every original node an actor holding only its local view."""
    pots.check_covers(g)
    rs = rs if rs is not None else compute_relevant_sets(t)
    split = split if split is not None else split_self_potentials(pots, t)
    actors = {}
    for n in g.sorted_nodes():
        owned = list(t.copies[n]) if n in t.cutset else [n]
        views = {}
        for v in owned:
            nbrs = tuple((w, t.origin[w]) for w in t.tree.neighbors(v))
            views[v] = VertexView(
                vertex=v,
                phi=split.potentials[v] if t.is_copy(v) else pots.phi(n),
                is_copy=t.is_copy(v),
                neighbors=nbrs,
                psi={m: pots.psi(m, n) for _, m in nbrs},
                relevant={m: tuple(sorted(rs.edge_set(v, w))) for w, m in nbrs},
                relevant_node=tuple(sorted(rs.node[v])),
                sum_out={m: tuple(sorted(rs.sum_out[(v, w)])) for w, m in nbrs},
            )
        actors[n] = NodeActor(n, pots.alphabet_size, views, t.belief_vertex(n))
    for actor in actors.values():
        check_locality(actor, g, t)
    return actors


def check_locality(actor: NodeActor, g, t: CopyNetwork) -> None:
    """Raise unless every item in the actor's view belongs to it or its incident edges."""
    n = actor.node
    nbrs = set(g.neighbors(n))
    for v, view in actor.vertices.items():
        if v != view.vertex or t.origin.get(v) != n:
            raise LocalityError(f"actor {n} holds vertex {v} owned by node {t.origin.get(v)}")
        for w, m in view.neighbors:
            if m not in nbrs or t.origin.get(w) != m:
                raise LocalityError(f"actor {n} references non-neighbor {m}")
        for key_map in (view.psi, view.relevant, view.sum_out):
            extra = set(key_map) - nbrs
            if extra:
                raise LocalityError(f"actor {n} holds data for non-incident edges to {sorted(extra)}")
    if actor.belief_vertex not in actor.vertices:
        raise LocalityError(f"actor {n} computes its belief at a vertex it does not own")


@dataclass
class DistributedResult:
    marginals: dict[int, np.ndarray]
    wire: list[WireMessage]
    rounds: int


def run_distributed(actors: dict[int, NodeActor], scheduler: str = "sync", seed: int | None = None,
                    workers: int = 1, rescale_messages: bool = True) -> DistributedResult:
    """Fire actors until every directed edge has carried its message.

    ``sync`` runs rounds against the inbox state at the start of the round
    (optionally with a thread pool); ``async`` delivers in-flight messages in a
    seeded random order.
    """
    total = sum(len(view.neighbors) for a in actors.values() for view in a.vertices.values())
    wire: list[WireMessage] = []
    rounds = 0
    if scheduler == "sync":
        pool = ThreadPoolExecutor(workers) if workers > 1 else None
        try:
            while len(wire) < total:
                jobs = [(a, n) for _, a in sorted(actors.items()) for n in a.ready()]
                if not jobs:
                    raise DeadlockError(f"no actor can send after {len(wire)} of {total} messages")
                if pool is not None:
                    batch = list(pool.map(lambda job: job[0].compute(job[1], rescale_messages), jobs))
                else:
                    batch = [a.compute(n, rescale_messages) for a, n in jobs]
                for (a, n), msg in zip(jobs, batch):
                    a.sent.add(n)
                for msg in batch:
                    actors[msg.receiver].receive(msg)
                wire.extend(batch)
                rounds += 1
        finally:
            if pool is not None:
                pool.shutdown()
    elif scheduler == "async":
        rng = random.Random(seed)
        pending: list[WireMessage] = []

        def fire(a: NodeActor):
            for n in a.ready():
                msg = a.compute(n, rescale_messages)
                a.sent.add(n)
                pending.append(msg)
                wire.append(msg)

        order = sorted(actors)
        rng.shuffle(order)
        for n in order:
            fire(actors[n])
        while pending:
            msg = pending.pop(rng.randrange(len(pending)))
            actors[msg.receiver].receive(msg)
            fire(actors[msg.receiver])
        if len(wire) < total:
            raise DeadlockError(f"quiescent after {len(wire)} of {total} messages")
    else:
        raise ValueError(f"unknown scheduler {scheduler!r}")
    incomplete = [n for n, a in actors.items() if not a.complete()]
    if incomplete:
        raise DeadlockError(f"actors {incomplete} never received all messages")
    return DistributedResult({n: a.local_marginal() for n, a in sorted(actors.items())}, wire, rounds)


def central_wire_dump(result, t: CopyNetwork) -> dict[tuple[int, int], WireMessage]:
    """Centralized LC messages in wire form, keyed by original directed edge."""
    out = {}
    for (a, b), m in result.messages.items():
        u, v = t.original_edge(a, b)
        out[(u, v)] = WireMessage.from_matrix(u, v, m)
    return out
