from __future__ import annotations

import itertools
import json
import warnings

import networkx as nx
import numpy as np
import pytest
from conftest import complete, cycle, graph_and_perm, graphs, path
from hypothesis import given

from graphette_flow.graph import (
    DegenerateGraphWarning,
    Graph,
    LabeledGraph,
    UnsupportedSizeError,
    canonical_form,
    canonical_labeling,
    check_permutation,
    edge_density,
    from_edge_list,
    graph_from_doc,
    graph_to_doc,
    largest_connected_component,
    permute,
    read_corpus,
    write_corpus,
)


def test_from_edge_list_examples():
    assert from_edge_list(3, [(0, 1), (1, 2), (0, 2)]).num_edges == 3
    assert from_edge_list(4, []).num_edges == 0
    g = from_edge_list(2, [(0, 1), (1, 0)])
    assert g.edges == ((0, 1),)


@pytest.mark.parametrize("pairs", [[(0, 3)], [(-1, 0)], [(1, 1)]])
def test_from_edge_list_rejects_bad_pairs(pairs):
    with pytest.raises(ValueError):
        from_edge_list(3, pairs)


def test_graph_rejects_unsorted_or_duplicate_edges():
    with pytest.raises(ValueError):
        Graph(3, ((1, 0),))
    with pytest.raises(ValueError):
        Graph(3, ((0, 1), (0, 1)))


def test_adjacency_is_symmetric_with_zero_diagonal():
    a = complete(4).adjacency()
    assert np.array_equal(a, a.T)
    assert np.all(np.diag(a) == 0)


def test_largest_component_examples():
    k3_plus_edge = from_edge_list(5, [(0, 1), (1, 2), (0, 2), (3, 4)])
    assert largest_connected_component(k3_plus_edge).edges == complete(3).edges
    two_edges = from_edge_list(4, [(1, 3), (0, 2)])
    lcc = largest_connected_component(two_edges)
    assert lcc.n == 2 and lcc.edges == ((0, 1),)
    # the tie goes to the component holding vertex 0
    assert largest_connected_component(from_edge_list(4, [(2, 3), (0, 1)])).n == 2
    assert largest_connected_component(path(5)).edges == path(5).edges
    assert largest_connected_component(Graph(0, ())).n == 0


def test_largest_component_relabels_in_input_order():
    g = from_edge_list(6, [(1, 4), (4, 5), (0, 2)])
    assert largest_connected_component(g).edges == ((0, 1), (1, 2))


def test_edge_density_examples():
    assert edge_density(complete(3)) == 1.0
    assert edge_density(path(3)) == pytest.approx(2 / 3, abs=1e-15)
    assert edge_density(Graph(5, ())) == 0.0


def test_edge_density_degenerate_warns():
    with pytest.warns(DegenerateGraphWarning):
        assert edge_density(Graph(1, ())) == 0.0


def test_permute_examples():
    assert permute(complete(3), [1, 2, 0]).edges == complete(3).edges
    assert permute(from_edge_list(3, [(0, 1)]), [2, 0, 1]).edges == ((0, 2),)
    g = path(4)
    assert permute(g, range(4)) == g


@pytest.mark.parametrize("perm", [[0, 1], [0, 0, 1], [0, 1, 3]])
def test_permute_rejects_non_bijections(perm):
    with pytest.raises(ValueError):
        permute(path(3), perm)
    with pytest.raises(ValueError):
        check_permutation(perm, 3)


@given(graph_and_perm())
def test_permute_preserves_statistics(gp):
    g, perm = gp
    h = permute(g, perm)
    assert h.num_edges == g.num_edges
    assert sorted(h.degrees().tolist()) == sorted(g.degrees().tolist())
    if g.n >= 2:
        assert edge_density(h) == edge_density(g)


@given(graphs())
def test_largest_component_is_connected(g):
    lcc = largest_connected_component(g)
    assert lcc.n == 0 or lcc.is_connected()
    assert all(lcc.n >= len(c) for c in g.components())


@given(graph_and_perm())
def test_canonical_form_permutation_invariant(gp):
    g, perm = gp
    assert canonical_form(g) == canonical_form(permute(g, perm))


def _brute_certificate(g: Graph) -> tuple:
    # lexicographically smallest upper-triangle over all n! orderings
    best = None
    for order in itertools.permutations(range(g.n)):
        code = tuple(int(g.has_edge(order[i], order[j])) for i in range(g.n) for j in range(i + 1, g.n))
        best = code if best is None or code > best else best
    return best


def test_canonical_form_examples():
    k3 = complete(3)
    assert canonical_form(k3) == canonical_form(permute(k3, [2, 0, 1]))
    assert canonical_form(path(3)) != canonical_form(k3)
    c4a = cycle(4)
    c4b = from_edge_list(4, [(0, 2), (2, 1), (1, 3), (3, 0)])
    assert canonical_form(c4a) == canonical_form(c4b)
    assert _brute_certificate(c4a) == _brute_certificate(c4b)


def test_canonical_form_matches_isomorphism_oracle():
    rng = np.random.default_rng(7)
    gs = []
    for _ in range(120):
        n = int(rng.integers(1, 7))
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.45]
        gs.append(from_edge_list(n, pairs))
    nxg = []
    for g in gs:
        h = nx.Graph()
        h.add_nodes_from(range(g.n))
        h.add_edges_from(g.edges)
        nxg.append(h)
    certs = [canonical_form(g) for g in gs]
    for i in range(len(gs)):
        for j in range(i + 1, len(gs)):
            assert (certs[i] == certs[j]) == nx.is_isomorphic(nxg[i], nxg[j])


def test_canonical_form_brute_force_agreement():
    # equal certificates iff equal brute-force lexicographic encodings
    rng = np.random.default_rng(8)
    gs = [from_edge_list(5, [(i, j) for i in range(5) for j in range(i + 1, 5) if rng.random() < 0.5]) for _ in range(40)]
    for a, b in itertools.combinations(gs, 2):
        assert (canonical_form(a) == canonical_form(b)) == (_brute_certificate(a) == _brute_certificate(b))


def test_canonical_form_size_bound():
    with pytest.raises(UnsupportedSizeError):
        canonical_form(Graph(13, ()))
    canonical_form(cycle(12))


def test_canonical_form_labels():
    p3 = path(3)
    assert canonical_form(p3, [0, 1, 0]) != canonical_form(p3, [1, 0, 0])
    assert canonical_form(p3, [1, 0, 0]) == canonical_form(p3, [0, 0, 1])
    assert canonical_form(p3, None, [0, 1]) == canonical_form(p3, None, [1, 0])
    assert canonical_form(p3, None, [0, 1]) != canonical_form(p3, None, [1, 1])


def test_canonical_labeling_relabels_to_same_graph():
    g = from_edge_list(6, [(0, 1), (1, 2), (2, 3), (3, 0), (0, 4), (4, 5)])
    perm = [3, 5, 0, 1, 4, 2]
    h = permute(g, perm)
    og, _ = canonical_labeling(g)
    oh, _ = canonical_labeling(h)
    assert g.induced(og) == h.induced(oh)


def test_labeled_graph_permute_and_induced():
    lg = LabeledGraph(path(3), (0, 1, 2), (0, 1))
    p = lg.permute([2, 1, 0])
    assert p.atoms == (2, 1, 0)
    assert p.bond_map() == {(1, 2): 0, (0, 1): 1}
    sub = lg.induced([2, 1])
    assert sub.atoms == (2, 1) and sub.bonds == (1,)


def test_labeled_graph_validates_lengths():
    with pytest.raises(ValueError):
        LabeledGraph(path(3), (0, 1), (0, 0))
    with pytest.raises(ValueError):
        LabeledGraph(path(3), (0, 1, 2), (0,))


def test_documents_round_trip(tmp_path):
    lg = LabeledGraph(path(3), (0, 1, 2), (0, 1))
    doc = graph_to_doc(lg)
    assert doc == {"n": 3, "edges": [[0, 1], [1, 2]], "atoms": [0, 1, 2], "bonds": [0, 1]}
    assert graph_from_doc(doc) == lg
    plain = graph_to_doc(cycle(4))
    assert set(plain) == {"n", "edges"}
    out = tmp_path / "c.jsonl"
    write_corpus(out, [doc, plain])
    assert read_corpus(out) == [doc, plain]
    lines = out.read_text().splitlines()
    assert json.loads(lines[0]) == doc


def test_graph_from_doc_bonds_follow_document_order():
    lg = graph_from_doc({"n": 3, "edges": [[2, 1], [0, 1]], "atoms": [0, 0, 0], "bonds": [2, 1]})
    assert lg.bond_map() == {(1, 2): 2, (0, 1): 1}


def test_no_warning_on_regular_density():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        edge_density(path(2))
