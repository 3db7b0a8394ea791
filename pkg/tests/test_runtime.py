import dataclasses
import json

import networkx as nx
import numpy as np
import pytest

from localcond.cutset import build_associated_tree, find_loop_cutset, trivial_tree
from localcond.graph import Graph
from localcond.local import run_local_conditioning
from localcond.model import brute_force_marginals, random_ising
from localcond.runtime import (
    LocalityError,
    WireError,
    WireMessage,
    central_wire_dump,
    check_locality,
    run_distributed,
    setup_actors,
)

from conftest import cyclic_corpus


def test_node5_view(golden, golden_tree):
    actors = setup_actors(golden.graph, golden.potentials, golden_tree)
    view = actors[5].vertices[5]
    assert [n for _, n in view.neighbors] == [2, 4, 6, 8]
    assert view.relevant_node == (4, 6, 8)
    assert view.relevant[4] == (4,) and view.relevant[2] == (4, 6, 8)


def test_cutset_actor_owns_all_copies(golden, golden_tree):
    actors = setup_actors(golden.graph, golden.potentials, golden_tree)
    assert set(actors[8].vertices) == set(golden_tree.copies[8])
    assert len(actors[8].vertices) == 3


def test_sync_is_bit_identical_to_central(golden, golden_tree):
    central = run_local_conditioning(golden.graph, golden.potentials, golden_tree)
    dist = run_distributed(setup_actors(golden.graph, golden.potentials, golden_tree), "sync")
    dump = central_wire_dump(central, golden_tree)
    assert len(dist.wire) == len(dump) == 2 * len(golden.graph.edges)
    for w in dist.wire:
        assert dump[(w.sender, w.receiver)] == w
    for n in golden.graph.nodes:
        np.testing.assert_array_equal(dist.marginals[n], central.marginals[n])


def test_sync_rounds_equal_tree_diameter(golden, golden_tree):
    dist = run_distributed(setup_actors(golden.graph, golden.potentials, golden_tree), "sync")
    assert dist.rounds == nx.diameter(golden_tree.tree.to_networkx())


def test_thread_pool_matches_serial(golden, golden_tree):
    a = run_distributed(setup_actors(golden.graph, golden.potentials, golden_tree), "sync")
    b = run_distributed(setup_actors(golden.graph, golden.potentials, golden_tree), "sync", workers=4)
    assert sorted(a.wire, key=lambda w: (w.sender, w.receiver)) == sorted(b.wire, key=lambda w: (w.sender, w.receiver))


@pytest.mark.parametrize("seed", range(5))
def test_async_agrees(golden, golden_tree, seed):
    ref = run_distributed(setup_actors(golden.graph, golden.potentials, golden_tree), "sync")
    dist = run_distributed(setup_actors(golden.graph, golden.potentials, golden_tree), "async", seed=seed)
    for n in golden.graph.nodes:
        np.testing.assert_allclose(dist.marginals[n], ref.marginals[n], rtol=0, atol=1e-12)


@pytest.mark.parametrize("model", cyclic_corpus(21, 10), ids=lambda m: f"n{len(m.graph.nodes)}e{len(m.graph.edges)}")
def test_distributed_exact_on_random_graphs(model):
    g = model.graph
    t = build_associated_tree(g, find_loop_cutset(g))
    dist = run_distributed(setup_actors(g, model.potentials, t), "async", seed=1)
    exact = brute_force_marginals(g, model.potentials)
    for n in g.nodes:
        np.testing.assert_allclose(dist.marginals[n], exact[n], rtol=1e-10)


def test_locality_violation_detected(golden, golden_tree):
    actors = setup_actors(golden.graph, golden.potentials, golden_tree)
    actor = actors[1]
    view = actor.vertices[1]
    view.psi[9] = golden.potentials.psi(9, 6)
    with pytest.raises(LocalityError):
        check_locality(actor, golden.graph, golden_tree)


def test_foreign_vertex_detected(golden, golden_tree):
    actors = setup_actors(golden.graph, golden.potentials, golden_tree)
    actors[1].vertices[2] = actors[2].vertices[2]
    with pytest.raises(LocalityError):
        check_locality(actors[1], golden.graph, golden_tree)


def test_receive_validates_ordering(golden, golden_tree):
    actors = setup_actors(golden.graph, golden.potentials, golden_tree)
    bad = WireMessage(4, 5, (6,), 2, 2, (1.0, 1.0, 1.0, 1.0), 0.0)
    with pytest.raises(WireError):
        actors[5].receive(bad)
    wrong_shape = WireMessage(4, 5, (4,), 2, 4, (1.0,) * 8, 0.0)
    with pytest.raises(WireError):
        actors[5].receive(wrong_shape)
    with pytest.raises(WireError):
        actors[1].receive(dataclasses.replace(bad, receiver=5))


def test_wire_json_roundtrip(golden, golden_tree):
    dist = run_distributed(setup_actors(golden.graph, golden.potentials, golden_tree), "sync")
    for w in dist.wire:
        assert WireMessage.from_json(json.loads(json.dumps(w.to_json()))) == w


def test_unknown_scheduler(golden, golden_tree):
    with pytest.raises(ValueError):
        run_distributed(setup_actors(golden.graph, golden.potentials, golden_tree), "fifo")


def test_single_node_network():
    g = Graph.from_edges([1], [])
    model = random_ising(g, np.random.default_rng(0))
    actors = setup_actors(g, model.potentials, trivial_tree(g))
    res = run_distributed(actors, "sync")
    assert res.wire == [] and res.rounds == 0
    np.testing.assert_allclose(res.marginals[1], model.potentials.phi(1) / model.potentials.phi(1).sum())
