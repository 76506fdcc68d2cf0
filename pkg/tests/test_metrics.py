from __future__ import annotations

import itertools
import math

import networkx as nx
import numpy as np
import pytest
from conftest import complete, cycle, graph_and_perm, path
from hypothesis import given

from graphette_flow.flow import ChemistryTable
from graphette_flow.graph import DegenerateGraphWarning, Graph, LabeledGraph, from_edge_list, permute
from graphette_flow.metrics import (
    GraphDescriptor,
    clustering_coefficients,
    clustering_hist,
    degree_hist,
    describe,
    mmd_squared,
    orbit_counts,
    orbit_matrix,
    pooled_bandwidth,
    ratio,
    vun,
)
from graphette_flow.priors import constant_graphon, sample_graphon

# reference graphlets with the orbit of each vertex
GRAPHLETS = [
    (nx.path_graph(2), [0, 0]),
    (nx.path_graph(3), [1, 2, 1]),
    (nx.complete_graph(3), [3, 3, 3]),
    (nx.path_graph(4), [4, 5, 5, 4]),
    (nx.star_graph(3), [7, 6, 6, 6]),
    (nx.cycle_graph(4), [8, 8, 8, 8]),
    (nx.Graph([(0, 1), (1, 2), (0, 2), (2, 3)]), [10, 10, 11, 9]),
    (nx.Graph([(0, 1), (1, 2), (0, 2), (1, 3), (2, 3)]), [12, 13, 13, 12]),
    (nx.complete_graph(4), [14, 14, 14, 14]),
]


def oracle_orbits(g: Graph) -> np.ndarray:
    """Enumerate every vertex subset and match it against the reference graphlets."""
    h = nx.Graph()
    h.add_nodes_from(range(g.n))
    h.add_edges_from(g.edges)
    out = np.zeros((g.n, 15), dtype=np.int64)
    for k in (2, 3, 4):
        for sub in itertools.combinations(range(g.n), k):
            s = h.subgraph(sub)
            if not nx.is_connected(s):
                continue
            for ref, orbits in GRAPHLETS:
                gm = nx.algorithms.isomorphism.GraphMatcher(s, ref)
                if gm.is_isomorphic():
                    for v, r in gm.mapping.items():
                        out[v, orbits[r]] += 1
                    break
            else:
                raise AssertionError("unmatched graphlet")
    return out


def star3() -> Graph:
    return from_edge_list(4, [(0, 1), (0, 2), (0, 3)])


def k3_pendant() -> Graph:
    return from_edge_list(4, [(0, 1), (1, 2), (0, 2), (0, 3)])


def desc(v) -> GraphDescriptor:
    return GraphDescriptor("degree_hist", np.asarray(v, dtype=float))


def test_degree_hist_examples():
    assert np.array_equal(degree_hist(complete(3)).vector, [0.0, 0.0, 1.0])
    assert np.array_equal(degree_hist(Graph(4, ())).vector, [1.0])
    assert np.array_equal(degree_hist(star3()).vector, [0.0, 0.75, 0.0, 0.25])


def test_degree_hist_overflow_bucket():
    assert np.array_equal(degree_hist(star3(), max_deg=2).vector, [0.0, 0.75, 0.25])
    assert np.array_equal(degree_hist(path(3), max_deg=5).vector, [0, 2 / 3, 1 / 3, 0, 0, 0])


def test_histograms_of_empty_graph_warn():
    with pytest.warns(DegenerateGraphWarning):
        assert degree_hist(Graph(0, ())).vector.sum() == 0.0


def test_clustering_examples():
    assert np.array_equal(clustering_coefficients(complete(4)), np.ones(4))
    assert np.array_equal(clustering_coefficients(path(5)), np.zeros(5))
    coeffs = clustering_coefficients(k3_pendant())
    assert coeffs[0] == pytest.approx(1 / 3, abs=1e-15)
    assert coeffs[1:].tolist() == [1.0, 1.0, 0.0]


def test_clustering_matches_networkx():
    rng = np.random.default_rng(0)
    for _ in range(50):
        g = sample_graphon(constant_graphon(0.4), int(rng.integers(1, 12)), rng)
        h = nx.Graph()
        h.add_nodes_from(range(g.n))
        h.add_edges_from(g.edges)
        ref = nx.clustering(h)
        assert np.allclose(clustering_coefficients(g), [ref[i] for i in range(g.n)], atol=1e-15)


def test_clustering_hist_examples():
    h = clustering_hist(complete(4))
    assert h.vector.size == 100 and h.vector[-1] == 1.0
    assert clustering_hist(path(4)).vector[0] == 1.0
    h = clustering_hist(k3_pendant(), bins=3)
    assert np.array_equal(h.vector, [0.25, 0.25, 0.5])
    with pytest.raises(ValueError):
        clustering_hist(path(3), bins=0)


def test_orbit_examples():
    assert np.array_equal(orbit_matrix(complete(3))[:, 3], [1, 1, 1])
    assert np.array_equal(orbit_matrix(complete(4))[:, 3], [3, 3, 3, 3])
    assert np.array_equal(orbit_counts(Graph(5, ())).vector, np.zeros(15))
    k4 = orbit_matrix(complete(4))
    assert np.array_equal(k4[:, 14], [1, 1, 1, 1])
    assert np.array_equal(orbit_matrix(star3())[0], [3, 0, 3, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0])


def test_orbit_descriptor_is_mean_of_integer_table():
    d = orbit_counts(k3_pendant())
    assert d.per_node.dtype.kind == "i"
    assert np.array_equal(d.vector, d.per_node.mean(axis=0))


def test_orbit_size_bound():
    with pytest.raises(ValueError):
        orbit_matrix(Graph(65, ()))
    orbit_matrix(cycle(64))


def test_orbits_match_subset_oracle():
    rng = np.random.default_rng(1)
    for named in (path(5), cycle(6), complete(5), star3(), k3_pendant()):
        assert np.array_equal(orbit_matrix(named), oracle_orbits(named))
    for _ in range(150):
        n = int(rng.integers(1, 8))
        g = sample_graphon(constant_graphon(float(rng.uniform(0.2, 0.9))), n, rng)
        assert np.array_equal(orbit_matrix(g), oracle_orbits(g))


@given(graph_and_perm(max_n=9))
def test_descriptors_are_permutation_invariant(gp):
    g, perm = gp
    if g.n == 0:
        return
    h = permute(g, perm)
    for kind in ("degree_hist", "clustering_hist", "orbit_counts"):
        (a,), (b,) = describe([g], kind), describe([h], kind)
        assert np.array_equal(a.vector, b.vector)


def test_descriptor_validation():
    with pytest.raises(ValueError):
        GraphDescriptor("wedges", np.zeros(2))
    with pytest.raises(ValueError):
        GraphDescriptor("degree_hist", np.array([-1.0]))


def test_mmd_examples():
    a = [desc([0.2, 0.8]), desc([1.0, 0.0])]
    assert abs(mmd_squared(a, list(reversed(a)))) <= 1e-12
    v, w = desc([0.0, 1.0]), desc([1.0, 1.0])
    sigma = 0.7
    assert mmd_squared([v], [w], sigma) == pytest.approx(2 - 2 * math.exp(-1.0 / (2 * sigma**2)), abs=1e-15)
    b = [desc([0.5, 0.5]), desc([0.1, 0.3]), desc([0.9])]
    assert mmd_squared(a, b) == pytest.approx(mmd_squared(b, a), abs=1e-15)


def test_mmd_errors():
    with pytest.raises(ValueError):
        mmd_squared([desc([1.0])], [GraphDescriptor("orbit_counts", np.zeros(15))])
    with pytest.raises(ValueError):
        mmd_squared([], [desc([1.0])])
    with pytest.raises(ValueError):
        mmd_squared([desc([1.0])], [desc([0.0])], bandwidth=0.0)


def test_mmd_nonnegative_and_self_zero():
    rng = np.random.default_rng(2)
    for _ in range(50):
        a = [desc(rng.random(int(rng.integers(1, 6)))) for _ in range(int(rng.integers(1, 6)))]
        b = [desc(rng.random(int(rng.integers(1, 6)))) for _ in range(int(rng.integers(1, 6)))]
        assert mmd_squared(a, b) >= -1e-12
        assert mmd_squared(a, a) <= 1e-12
        assert mmd_squared(a, b) == pytest.approx(mmd_squared(b, a), abs=1e-14)


def test_pooled_bandwidth_examples():
    assert pooled_bandwidth([desc([0.0])], [desc([3.0])]) == 3.0
    assert pooled_bandwidth([desc([1.0])], [desc([1.0])]) == 1.0
    assert pooled_bandwidth([desc([1.0])]) == 1.0


def test_ratio_examples():
    rng = np.random.default_rng(3)
    train = [desc(rng.random(4)) for _ in range(6)]
    test = [desc(rng.random(4)) for _ in range(5)]
    assert ratio(train, train, test) == pytest.approx(1.0, abs=1e-12)
    assert ratio(test, train, test) == pytest.approx(0.0, abs=1e-12)
    gen = [desc(rng.random(4)) for _ in range(4)]
    scaled = [[desc(3.0 * d.vector) for d in s] for s in (gen, train, test)]
    assert ratio(*scaled) == pytest.approx(ratio(gen, train, test), rel=1e-10)


def test_ratio_degenerate_denominator():
    same = [desc([0.5, 0.5])]
    with pytest.warns(DegenerateGraphWarning):
        assert math.isnan(ratio([desc([1.0, 0.0])], same, same))


def test_vun_examples():
    chem = ChemistryTable()
    a = LabeledGraph(path(3), (0, 0, 0), (0, 0))
    b = LabeledGraph(complete(3), (0, 0, 0), (0, 0, 0))
    c = LabeledGraph(path(2), (3, 3), (0,))
    assert vun([a, b], [c], chem) == (100.0, 100.0, 100.0)
    assert vun([a, a.permute([2, 1, 0])], [c], chem) == (100.0, 50.0, 100.0)
    assert vun([a, b, c], [c], chem)[2] == pytest.approx(200 / 3, abs=1e-12)
    bad = LabeledGraph(path(3), (0, 3, 0), (0, 0))
    assert vun([a, bad], [], chem) == (50.0, 100.0, 100.0)
    assert vun([bad], [], chem) == (0.0, 0.0, 0.0)


def test_vun_plain_graphs_and_size_bound():
    assert vun([path(3), cycle(4)], [cycle(4)]) == (100.0, 100.0, 50.0)
    from graphette_flow.graph import UnsupportedSizeError

    with pytest.raises(UnsupportedSizeError):
        vun([Graph(13, ())], [])
