"""Gibbs distributions on undirected graphs and the brute-force belief oracle."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import kernels
from .graph import Graph, GraphError, build_grid, edge_key, is_connected

MAX_CONFIGURATIONS = 1 << 24


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class PotentialSet:
    """Self potentials per node and edge potentials per undirected edge.

    ``edge_potentials[(i, j)]`` with ``i < j`` is indexed ``[x_i, x_j]``.
    """

    alphabet_size: int
    self_potentials: Mapping[int, np.ndarray]
    edge_potentials: Mapping[tuple[int, int], np.ndarray]

    def __post_init__(self):
        if self.alphabet_size < 2:
            raise ModelError("alphabet size must be at least 2")
        q = self.alphabet_size
        for n, phi in self.self_potentials.items():
            if phi.shape != (q,) or not np.all(phi > 0):
                raise ModelError(f"self potential of node {n} must be a positive vector of length {q}")
            phi.setflags(write=False)
        for (i, j), psi in self.edge_potentials.items():
            if i >= j:
                raise ModelError(f"edge potential key ({i}, {j}) must have smaller endpoint first")
            if psi.shape != (q, q) or not np.all(psi > 0):
                raise ModelError(f"edge potential of ({i}, {j}) must be a positive {q}x{q} matrix")
            psi.setflags(write=False)

    def phi(self, i: int) -> np.ndarray:
        return self.self_potentials[i]

    def psi(self, i: int, j: int) -> np.ndarray:
        """Edge potential oriented as ``[x_i, x_j]``."""
        if i < j:
            return self.edge_potentials[(i, j)]
        return self.edge_potentials[(j, i)].T

    def check_covers(self, g: Graph) -> None:
        missing_nodes = g.nodes - set(self.self_potentials)
        missing_edges = g.edges - set(self.edge_potentials)
        if missing_nodes or missing_edges:
            raise ModelError(
                f"potentials missing for nodes {sorted(missing_nodes)} / edges {sorted(missing_edges)}"
            )


@dataclass(frozen=True)
class IsingParams:
    alpha: Mapping[int, float]
    theta: Mapping[tuple[int, int], float]


@dataclass
class BeliefVector:
    """Unnormalized belief ``values * exp(log_scale)``."""

    node: int
    values: np.ndarray
    log_scale: float = 0.0


@dataclass
class Model:
    """A graph together with its potentials."""

    graph: Graph
    potentials: PotentialSet
    ising: IsingParams | None = field(default=None)


def expand_ising(p: IsingParams, g: Graph) -> PotentialSet:
    phis = {}
    for n in g.sorted_nodes():
        if n not in p.alpha:
            raise ModelError(f"missing alpha for node {n}")
        a = float(p.alpha[n])
        phis[n] = np.array([np.exp(a), np.exp(-a)])
    theta = {edge_key(*e): v for e, v in p.theta.items()}
    psis = {}
    for e in g.sorted_edges():
        if e not in theta:
            raise ModelError(f"missing theta for edge {e}")
        t = float(theta[e])
        psis[e] = np.array([[np.exp(t), np.exp(-t)], [np.exp(-t), np.exp(t)]])
    return PotentialSet(2, phis, psis)


def brute_force_beliefs(g: Graph, pots: PotentialSet) -> dict[int, BeliefVector]:
    """Beliefs of every node by exhaustive enumeration of all configurations."""
    if not is_connected(g):
        raise GraphError("brute-force oracle requires a connected graph")
    pots.check_covers(g)
    q = pots.alphabet_size
    nodes = g.sorted_nodes()
    if q ** len(nodes) > MAX_CONFIGURATIONS:
        raise ModelError(f"{q}^{len(nodes)} configurations exceed the enumeration guard")
    pos = {n: k for k, n in enumerate(nodes)}
    # pre-scale so every factor is <= 1 and the running product cannot overflow
    log_scale = 0.0
    phi = np.empty((len(nodes), q))
    for n in nodes:
        m = pots.phi(n).max()
        phi[pos[n]] = pots.phi(n) / m
        log_scale += np.log(m)
    edges = g.sorted_edges()
    psi = np.empty((len(edges), q, q))
    for k, (i, j) in enumerate(edges):
        m = pots.psi(i, j).max()
        psi[k] = pots.psi(i, j) / m
        log_scale += np.log(m)
    eu = np.array([pos[i] for i, _ in edges], dtype=np.int64)
    ev = np.array([pos[j] for _, j in edges], dtype=np.int64)
    z = kernels.enumerate_beliefs(phi, eu, ev, psi.reshape(len(edges), q, q))
    return {n: BeliefVector(n, z[pos[n]].copy(), log_scale) for n in nodes}


def brute_force_belief(g: Graph, pots: PotentialSet, i: int) -> BeliefVector:
    if i not in g.nodes:
        raise GraphError(f"unknown node {i}")
    return brute_force_beliefs(g, pots)[i]


def marginal(z: BeliefVector | np.ndarray) -> np.ndarray:
    values = z.values if isinstance(z, BeliefVector) else np.asarray(z, dtype=float)
    total = values.sum()
    if not total > 0:
        raise ModelError("belief has zero sum")
    return values / total


def brute_force_marginals(g: Graph, pots: PotentialSet) -> dict[int, np.ndarray]:
    return {n: marginal(b) for n, b in brute_force_beliefs(g, pots).items()}


# --- JSON model files -------------------------------------------------------

def _parse_edge(key: str) -> tuple[int, int]:
    try:
        a, b = key.split("-")
        return int(a), int(b)
    except ValueError as exc:
        raise ModelError(f"bad edge key {key!r}; expected 'i-j'") from exc


def model_from_json(data: dict) -> Model:
    try:
        g = Graph.from_json(data["graph"])
        q = int(data.get("alphabet", 2))
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelError(f"malformed model: {exc}") from exc
    has_ising = "ising" in data
    has_explicit = "phi" in data or "psi" in data
    if has_ising == has_explicit:
        raise ModelError("model must contain exactly one of 'ising' or explicit 'phi'/'psi'")
    if has_ising:
        if q != 2:
            raise ModelError("Ising models require alphabet 2")
        ising = data["ising"]
        params = IsingParams(
            alpha={int(k): float(v) for k, v in ising.get("alpha", {}).items()},
            theta={_parse_edge(k): float(v) for k, v in ising.get("theta", {}).items()},
        )
        return Model(g, expand_ising(params, g), params)
    phis = {int(k): np.array(v, dtype=float) for k, v in data.get("phi", {}).items()}
    psis = {}
    for k, v in data.get("psi", {}).items():
        i, j = _parse_edge(k)
        m = np.array(v, dtype=float)
        psis[edge_key(i, j)] = m if i < j else m.T.copy()
    pots = PotentialSet(q, phis, psis)
    pots.check_covers(g)
    return Model(g, pots)


def model_to_json(model: Model) -> dict:
    g = model.graph
    out = {"alphabet": model.potentials.alphabet_size, "graph": g.to_json()}
    if model.ising is not None:
        out["ising"] = {
            "alpha": {str(n): float(model.ising.alpha[n]) for n in g.sorted_nodes()},
            "theta": {f"{i}-{j}": float(model.ising.theta.get((i, j), model.ising.theta.get((j, i))))
                      for i, j in g.sorted_edges()},
        }
    else:
        pots = model.potentials
        out["phi"] = {str(n): pots.phi(n).tolist() for n in g.sorted_nodes()}
        out["psi"] = {f"{i}-{j}": pots.psi(i, j).tolist() for i, j in g.sorted_edges()}
    return out


def load_model(path) -> Model:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelError(f"{path}: not valid JSON ({exc})") from exc
    return model_from_json(data)


def ising_model(g: Graph, alpha: Mapping[int, float], theta: Mapping[tuple[int, int], float]) -> Model:
    params = IsingParams(dict(alpha), {edge_key(*e): v for e, v in theta.items()})
    return Model(g, expand_ising(params, g), params)


def random_ising(g: Graph, rng: np.random.Generator, scale: float = 0.5) -> Model:
    alpha = {n: float(rng.uniform(-scale, scale)) for n in g.sorted_nodes()}
    theta = {e: float(rng.uniform(-scale, scale)) for e in g.sorted_edges()}
    return ising_model(g, alpha, theta)


def golden_model() -> Model:
    """3x3 grid with alpha_i = 0.1*i and theta = 0.2 on every edge."""
    g = build_grid(3, 3)
    return ising_model(g, {n: 0.1 * n for n in g.nodes}, {e: 0.2 for e in g.edges})
