import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from localcond.conditioning import ColumnOrdering, MessageMatrix, run_conditioning
from localcond.cutset import build_associated_tree, find_loop_cutset
from localcond.graph import build_grid
from localcond.local import (
    RelevantSetError,
    best_associated_tree,
    compute_relevant_sets,
    expand,
    permutation_map,
    reorder,
    run_local_conditioning,
    sum_out,
    summation_matrix,
)
from localcond.model import PotentialSet, brute_force_marginals, random_ising

from conftest import cyclic_corpus


def _rel(t, rs, u, v):
    return set(rs.edge_set(*t.tree_edge(u, v)))


def test_golden_relevant_sets(golden_tree):
    t = golden_tree
    rs = compute_relevant_sets(t)
    assert _rel(t, rs, 1, 2) == {4, 8}
    assert _rel(t, rs, 2, 5) == {4, 6, 8}
    assert _rel(t, rs, 2, 3) == {6, 8}
    assert _rel(t, rs, 4, 5) == {4}
    assert _rel(t, rs, 6, 5) == {6}
    assert _rel(t, rs, 8, 5) == {8}
    assert set(rs.node[5]) == {4, 6, 8}


def test_relevant_sets_partition_cutset(golden_tree):
    rs = compute_relevant_sets(golden_tree)
    for v in golden_tree.tree.nodes:
        assert rs.partitions(v, golden_tree.tree.neighbors(v))
        parts = [rs.upstream[(k, v)] for k in golden_tree.tree.neighbors(v)]
        covered = set(rs.node[v]).union(*parts)
        assert covered == {4, 6, 8}
        for a in range(len(parts)):
            for b in range(a + 1, len(parts)):
                assert not parts[a] & parts[b]
            assert not parts[a] & rs.node[v]


@pytest.mark.parametrize("model", cyclic_corpus(13, 15), ids=lambda m: f"n{len(m.graph.nodes)}e{len(m.graph.edges)}")
def test_partition_on_random_trees(model):
    g = model.graph
    t = build_associated_tree(g, find_loop_cutset(g))
    rs = compute_relevant_sets(t)
    for v in t.tree.nodes:
        assert rs.partitions(v, t.tree.neighbors(v))


def test_relevant_set_cutset_mismatch(golden_tree):
    with pytest.raises(RelevantSetError):
        compute_relevant_sets(golden_tree, [4, 6])


def test_expand_prepends_added_nodes():
    m = MessageMatrix(4, 5, ColumnOrdering((4,), 2), np.array([[1.0, 2.0], [3.0, 4.0]]))
    e = expand(m, {4, 6, 8})
    assert e.ordering.nodes == (6, 8, 4)
    assert e.n_columns == 8
    np.testing.assert_array_equal(e.values[:, 0::2], np.repeat([[1.0], [3.0]], 4, axis=1))
    np.testing.assert_array_equal(e.values[:, 1::2], np.repeat([[2.0], [4.0]], 4, axis=1))


def test_expand_requires_superset():
    m = MessageMatrix(4, 5, ColumnOrdering((4,), 2), np.ones((2, 2)))
    with pytest.raises(RelevantSetError):
        expand(m, {6})


def test_permutation_matrix_example():
    pm = permutation_map((6, 8, 4), (4, 6, 8), 2)
    np.testing.assert_array_equal(pm.matrix(), [[0, 0, 1], [1, 0, 0], [0, 1, 0]])
    digits_src = ColumnOrdering((6, 8, 4), 2).digits()
    digits_dst = ColumnOrdering((4, 6, 8), 2).digits()
    for c in range(8):
        np.testing.assert_array_equal(pm.matrix() @ digits_src[c], digits_dst[pm.index[c]])


def test_reorder_moves_first_digit():
    m = MessageMatrix(4, 5, ColumnOrdering((4,), 2), np.array([[1.0, 2.0], [3.0, 4.0]]))
    r = reorder(expand(m, {4, 6, 8}), (4, 6, 8))
    np.testing.assert_array_equal(r.values[0], [1, 1, 1, 1, 2, 2, 2, 2])


def test_stacked_identity_summation():
    s = summation_matrix(ColumnOrdering((4, 6, 8), 2), {4})
    np.testing.assert_array_equal(s, np.vstack([np.eye(4), np.eye(4)]))
    rng = np.random.default_rng(0)
    m = MessageMatrix(2, 3, ColumnOrdering((4, 6, 8), 2), rng.uniform(size=(2, 8)))
    out = sum_out(m, {4})
    assert out.ordering.nodes == (6, 8)
    np.testing.assert_allclose(out.values, m.values @ s, rtol=0, atol=1e-14)


orderings = st.lists(st.integers(1, 12), min_size=1, max_size=4, unique=True)


@settings(max_examples=60, deadline=None)
@given(orderings, st.integers(2, 3), st.data())
def test_reorder_roundtrip(nodes, radix, data):
    target = data.draw(st.permutations(nodes))
    rng = np.random.default_rng(len(nodes))
    m = MessageMatrix(1, 2, ColumnOrdering(tuple(nodes), radix), rng.uniform(size=(radix, radix ** len(nodes))))
    back = reorder(reorder(m, target), tuple(nodes))
    np.testing.assert_array_equal(back.values, m.values)


@settings(max_examples=60, deadline=None)
@given(orderings, st.integers(2, 3), st.data())
def test_sum_out_is_matrix_product(nodes, radix, data):
    drop = data.draw(st.sets(st.sampled_from(nodes)))
    o = ColumnOrdering(tuple(nodes), radix)
    rng = np.random.default_rng(radix)
    m = MessageMatrix(1, 2, o, rng.uniform(size=(radix, o.n_columns)))
    np.testing.assert_allclose(sum_out(m, drop).values, m.values @ summation_matrix(o, drop), rtol=1e-14)


@settings(max_examples=60, deadline=None)
@given(orderings, st.integers(2, 3), st.sets(st.integers(20, 25), min_size=1, max_size=2))
def test_sum_out_after_expand_scales(nodes, radix, extra):
    o = ColumnOrdering(tuple(sorted(nodes)), radix)
    rng = np.random.default_rng(0)
    m = MessageMatrix(1, 2, o, rng.uniform(size=(radix, o.n_columns)))
    e = expand(m, set(nodes) | extra)
    back = sum_out(e, extra)
    np.testing.assert_allclose(back.values, m.values * radix ** len(extra), rtol=1e-14)


def test_golden_exact_and_column_counts(golden, golden_tree):
    res = run_local_conditioning(golden.graph, golden.potentials, golden_tree)
    exact = brute_force_marginals(golden.graph, golden.potentials)
    for n in golden.graph.nodes:
        np.testing.assert_allclose(res.marginals[n], exact[n], rtol=1e-10)
    t = golden_tree
    assert res.messages[t.tree_edge(2, 3)].n_columns == 4
    assert res.messages[t.tree_edge(5, 2)].n_columns == 8
    for u in (4, 6, 8):
        assert res.messages[t.tree_edge(u, 5)].n_columns == 2
    assert res.report["edge_columns"]["2-5"] == 8
    assert res.report["max_node_relevant"] == 3


@pytest.mark.parametrize("model", cyclic_corpus(9, 30), ids=lambda m: f"n{len(m.graph.nodes)}e{len(m.graph.edges)}")
def test_random_graphs_exact(model):
    g = model.graph
    t = build_associated_tree(g, find_loop_cutset(g))
    res = run_local_conditioning(g, model.potentials, t)
    exact = brute_force_marginals(g, model.potentials)
    for n in g.nodes:
        np.testing.assert_allclose(res.marginals[n], exact[n], rtol=1e-10)


def test_messages_are_summed_conditioning_messages(golden, golden_tree):
    """An unscaled local message is the full message summed over the sender-side nodes."""
    t = golden_tree
    rs = compute_relevant_sets(t)
    full = run_conditioning(golden.graph, golden.potentials, t, rescale_messages=False)
    local = run_local_conditioning(golden.graph, golden.potentials, t, rescale_messages=False)
    for (j, i), m in local.messages.items():
        fm = full.messages[(j, i)]
        # the message does not depend on nodes entirely behind the receiver: pick digit 0
        behind = rs.upstream[(i, j)]
        pick = np.all(fm.ordering.digits()[:, [fm.ordering.nodes.index(n) for n in behind]] == 0, axis=1)
        kept = ColumnOrdering(tuple(n for n in fm.ordering.nodes if n not in behind), 2)
        reduced = MessageMatrix(j, i, kept, fm.values[:, pick])
        summed = sum_out(reduced, rs.upstream[(j, i)])
        assert summed.ordering.nodes == m.ordering.nodes
        np.testing.assert_allclose(summed.values, m.values, rtol=1e-12)


def test_best_tree_meets_grid_bound():
    for rows, cols in [(3, 3), (3, 4), (4, 3), (4, 4)]:
        g = build_grid(rows, cols)
        _, size = best_associated_tree(g, find_loop_cutset(g), range(16))
        assert size <= rows + 1


def test_scaling_neutrality(golden, golden_tree):
    on = run_local_conditioning(golden.graph, golden.potentials, golden_tree, rescale_messages=True)
    off = run_local_conditioning(golden.graph, golden.potentials, golden_tree, rescale_messages=False)
    for n in golden.graph.nodes:
        np.testing.assert_allclose(on.marginals[n], off.marginals[n], rtol=1e-12)


def test_ternary_alphabet_exact():
    rng = np.random.default_rng(4)
    g = build_grid(2, 3)
    pots = PotentialSet(3, {n: rng.uniform(0.3, 3, 3) for n in g.nodes},
                        {e: rng.uniform(0.3, 3, (3, 3)) for e in g.edges})
    t = build_associated_tree(g, find_loop_cutset(g))
    res = run_local_conditioning(g, pots, t)
    exact = brute_force_marginals(g, pots)
    for n in g.nodes:
        np.testing.assert_allclose(res.marginals[n], exact[n], rtol=1e-10)


def test_large_potentials_stay_finite():
    g = build_grid(3, 3)
    model = random_ising(g, np.random.default_rng(2), scale=60.0)
    t = build_associated_tree(g, [4, 6, 8])
    res = run_local_conditioning(g, model.potentials, t)
    for p in res.marginals.values():
        assert np.all(np.isfinite(p))
