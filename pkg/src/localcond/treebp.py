"""Sum-product Belief Propagation on acyclic networks.

Messages are computed in column form (``|X| x 1``) through the same fusion,
propagation and rescaling primitives the conditioned variants use, so a
degenerate conditioning run reproduces these results bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .graph import Graph, GraphError, connected_components, find_cycles_basis, is_acyclic
from .model import BeliefVector, PotentialSet, marginal


class MissingMessageError(KeyError):
    pass


@dataclass
class MessageVector:
    sender: int
    receiver: int
    values: np.ndarray
    log_scale: float = 0.0


@dataclass(frozen=True)
class Schedule:
    """Directed edges in an order where every message's inputs come first."""

    order: tuple[tuple[int, int], ...]

    def __iter__(self):
        return iter(self.order)

    def __len__(self):
        return len(self.order)


# --- shared primitives ------------------------------------------------------

def fuse(base: np.ndarray, factors: Sequence[np.ndarray]) -> np.ndarray:
    """Element-wise product, multiplied left to right."""
    out = np.array(base, dtype=np.float64, copy=True)
    for f in factors:
        out = out * f
    return out


def propagate(psi: np.ndarray, fused: np.ndarray) -> np.ndarray:
    return kernels.propagate(psi, fused)


def rescale(values: np.ndarray, log_scale: float, enabled: bool = True) -> tuple[np.ndarray, float]:
    """Divide by the max entry and absorb the factor into ``log_scale``."""
    if not enabled:
        return values, log_scale
    m = values.max()
    if not m > 0:
        return values, log_scale
    return values / m, log_scale + float(np.log(m))


# --- Belief Propagation -----------------------------------------------------

def _collect(incoming: Mapping[int, MessageVector], senders: Sequence[int], target: int):
    missing = [k for k in senders if k not in incoming]
    if missing:
        raise MissingMessageError(f"missing messages into {target} from {missing}")
    return [incoming[k] for k in sorted(senders)]


def bp_message(j: int, i: int, incoming: Mapping[int, MessageVector], pots: PotentialSet,
               g: Graph | None = None, rescale_messages: bool = True) -> MessageVector:
    """Message from ``j`` to ``i`` given messages into ``j`` from its other neighbors.

    Without ``g`` the senders are taken to be the keys of ``incoming``.
    """
    senders = [k for k in g.neighbors(j) if k != i] if g is not None else [k for k in incoming if k != i]
    msgs = _collect(incoming, senders, j)
    fused = fuse(pots.phi(j)[:, None], [m.values[:, None] for m in msgs])
    values = propagate(pots.psi(i, j), fused)[:, 0]
    log_scale = float(sum(m.log_scale for m in msgs))
    values, log_scale = rescale(values, log_scale, rescale_messages)
    return MessageVector(j, i, values, log_scale)


def bp_belief(i: int, incoming: Mapping[int, MessageVector], pots: PotentialSet,
              g: Graph | None = None) -> BeliefVector:
    senders = list(g.neighbors(i)) if g is not None else list(incoming)
    msgs = _collect(incoming, senders, i)
    fused = fuse(pots.phi(i)[:, None], [m.values[:, None] for m in msgs])
    return BeliefVector(i, fused[:, 0], float(sum(m.log_scale for m in msgs)))


def make_schedule(t: Graph, root: int | None = None) -> Schedule:
    """Leaves-to-root pass followed by root-to-leaves pass."""
    if not is_acyclic(t):
        raise GraphError("schedule requires an acyclic graph")
    if not t.nodes:
        return Schedule(())
    if len(connected_components(t)) != 1:
        raise GraphError("schedule requires a connected graph")
    root = min(t.nodes) if root is None else root
    parent, preorder = _preorder(t, root)
    up = [(v, parent[v]) for v in _postorder(t, root) if parent[v] is not None]
    down = [(parent[v], v) for v in preorder if parent[v] is not None]
    return Schedule(tuple(up) + tuple(down))


def _preorder(t: Graph, root: int) -> tuple[dict, list[int]]:
    # children visited in ascending id
    parent: dict[int, int | None] = {root: None}
    out, stack = [], [root]
    while stack:
        u = stack.pop()
        out.append(u)
        for v in reversed(t.neighbors(u)):
            if v not in parent:
                parent[v] = u
                stack.append(v)
    return parent, out


def _postorder(t: Graph, root: int) -> list[int]:
    out, seen = [], {root}
    stack = [(root, iter(t.neighbors(root)))]
    while stack:
        u, it = stack[-1]
        for v in it:
            if v not in seen:
                seen.add(v)
                stack.append((v, iter(t.neighbors(v))))
                break
        else:
            stack.pop()
            out.append(u)
    return out


def check_schedule(t: Graph, schedule: Schedule) -> bool:
    """Every directed edge exactly once, each after all of its inputs."""
    expected = {(i, j) for i, j in t.edges} | {(j, i) for i, j in t.edges}
    if len(schedule) != len(expected) or set(schedule) != expected:
        return False
    sent = set()
    for j, i in schedule:
        if any((k, j) not in sent for k in t.neighbors(j) if k != i):
            return False
        sent.add((j, i))
    return True


@dataclass
class BPResult:
    messages: dict[tuple[int, int], MessageVector]
    beliefs: dict[int, BeliefVector]
    marginals: dict[int, np.ndarray]


def run_bp(g: Graph, pots: PotentialSet, rescale_messages: bool = True) -> BPResult:
    if not is_acyclic(g):
        cycle = find_cycles_basis(g)[0]
        raise GraphError(f"bp requires an acyclic graph; found cycle {cycle}")
    pots.check_covers(g)
    messages: dict[tuple[int, int], MessageVector] = {}
    for j, i in make_schedule(g):
        incoming = {k: messages[(k, j)] for k in g.neighbors(j) if k != i}
        messages[(j, i)] = bp_message(j, i, incoming, pots, g, rescale_messages)
    beliefs = {}
    for i in g.sorted_nodes():
        beliefs[i] = bp_belief(i, {k: messages[(k, i)] for k in g.neighbors(i)}, pots, g)
    return BPResult(messages, beliefs, {i: marginal(b) for i, b in beliefs.items()})
