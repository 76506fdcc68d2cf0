"""Simple undirected graphs, relabelings and small-graph canonical forms."""

from __future__ import annotations

import json
import warnings
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "DegenerateGraphWarning",
    "Graph",
    "LabeledGraph",
    "UnsupportedSizeError",
    "canonical_form",
    "canonical_labeling",
    "check_permutation",
    "edge_density",
    "from_edge_list",
    "graph_from_doc",
    "graph_to_doc",
    "is_labeled_doc",
    "largest_connected_component",
    "permute",
    "read_corpus",
    "write_corpus",
]

CANONICAL_MAX_NODES = 12


class UnsupportedSizeError(ValueError):
    """Raised when an exhaustive routine is asked to handle a graph above its size bound."""


class DegenerateGraphWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on vertices ``0..n-1``.

    ``edges`` holds sorted ``(u, v)`` pairs with ``u < v``, in ascending order.
    Build instances with :func:`from_edge_list` unless the edge tuple is
    already normalized.
    """

    n: int
    edges: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        if self.n < 0:
            raise ValueError("vertex count must be nonnegative")
        prev = None
        for u, v in self.edges:
            if not (0 <= u < v < self.n):
                raise ValueError(f"edge ({u}, {v}) is not a normalized pair for n={self.n}")
            if prev is not None and (u, v) <= prev:
                raise ValueError("edges must be sorted and unique")
            prev = (u, v)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return tuple(tuple(sorted(a)) for a in adj)

    @cached_property
    def neighbor_sets(self) -> tuple[frozenset[int], ...]:
        return tuple(frozenset(a) for a in self.neighbors)

    @cached_property
    def edge_set(self) -> frozenset[tuple[int, int]]:
        return frozenset(self.edges)

    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.neighbors], dtype=np.int64)

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.neighbor_sets[u]

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=np.float64)
        for u, v in self.edges:
            a[u, v] = a[v, u] = 1.0
        return a

    def induced(self, vertices: Sequence[int]) -> Graph:
        """Induced subgraph on ``vertices``; vertex ``vertices[k]`` becomes ``k``."""
        index = {v: k for k, v in enumerate(vertices)}
        if len(index) != len(vertices):
            raise ValueError("duplicate vertices")
        pairs = []
        for u, v in self.edges:
            if u in index and v in index:
                pairs.append((index[u], index[v]))
        return from_edge_list(len(vertices), pairs)

    def components(self) -> list[list[int]]:
        """Connected components as sorted vertex lists, ordered by smallest vertex."""
        seen = [False] * self.n
        comps = []
        for s in range(self.n):
            if seen[s]:
                continue
            seen[s] = True
            comp = [s]
            queue = deque([s])
            while queue:
                u = queue.popleft()
                for w in self.neighbors[u]:
                    if not seen[w]:
                        seen[w] = True
                        comp.append(w)
                        queue.append(w)
            comps.append(sorted(comp))
        return comps

    def is_connected(self) -> bool:
        return self.n <= 1 or len(self.components()) == 1


def from_edge_list(n: int, pairs: Iterable[Sequence[int]]) -> Graph:
    """Build a graph, dropping duplicate and reversed pairs.

    Raises ``ValueError`` for self-loops or out-of-range endpoints.
    """
    norm = set()
    for pair in pairs:
        u, v = int(pair[0]), int(pair[1])
        if not (0 <= u < n and 0 <= v < n):
            raise ValueError(f"edge ({u}, {v}) out of range for n={n}")
        if u == v:
            raise ValueError(f"self-loop at vertex {u}")
        norm.add((u, v) if u < v else (v, u))
    return Graph(int(n), tuple(sorted(norm)))


def largest_connected_component(g: Graph) -> Graph:
    """Induced subgraph on the largest component, relabeled in original order.

    Ties go to the component holding the smallest vertex id.
    """
    if g.n == 0:
        return g
    comps = g.components()
    best = max(comps, key=lambda c: (len(c), -c[0]))
    return g.induced(best)


def edge_density(g: Graph) -> float:
    if g.n < 2:
        warnings.warn(f"edge density undefined for n={g.n}; returning 0.0", DegenerateGraphWarning, stacklevel=2)
        return 0.0
    return g.num_edges / (g.n * (g.n - 1) / 2)


def check_permutation(perm: Sequence[int], n: int | None = None) -> tuple[int, ...]:
    p = tuple(int(x) for x in perm)
    if n is not None and len(p) != n:
        raise ValueError(f"permutation has length {len(p)}, expected {n}")
    if sorted(p) != list(range(len(p))):
        raise ValueError("not a permutation")
    return p


def permute(g: Graph, perm: Sequence[int]) -> Graph:
    """Relabel vertex ``u`` as ``perm[u]``."""
    p = check_permutation(perm, g.n)
    return from_edge_list(g.n, [(p[u], p[v]) for u, v in g.edges])


@dataclass(frozen=True)
class LabeledGraph:
    """Graph with integer atom types per vertex and bond types per edge.

    ``bonds[k]`` is the type of ``graph.edges[k]``.
    """

    graph: Graph
    atoms: tuple[int, ...] = field(default=())
    bonds: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        if not self.atoms:
            object.__setattr__(self, "atoms", (0,) * self.graph.n)
        if not self.bonds:
            object.__setattr__(self, "bonds", (0,) * self.graph.num_edges)
        if len(self.atoms) != self.graph.n:
            raise ValueError("atom label count does not match vertex count")
        if len(self.bonds) != self.graph.num_edges:
            raise ValueError("bond label count does not match edge count")

    @property
    def n(self) -> int:
        return self.graph.n

    def bond_map(self) -> dict[tuple[int, int], int]:
        return dict(zip(self.graph.edges, self.bonds))

    def permute(self, perm: Sequence[int]) -> LabeledGraph:
        p = check_permutation(perm, self.n)
        atoms = [0] * self.n
        for u, a in enumerate(self.atoms):
            atoms[p[u]] = a
        bmap = {}
        for (u, v), b in zip(self.graph.edges, self.bonds):
            a, c = p[u], p[v]
            bmap[(a, c) if a < c else (c, a)] = b
        g = from_edge_list(self.n, bmap)
        return LabeledGraph(g, tuple(atoms), tuple(bmap[e] for e in g.edges))

    def induced(self, vertices: Sequence[int]) -> LabeledGraph:
        g = self.graph.induced(vertices)
        bmap = self.bond_map()
        bonds = []
        for a, b in g.edges:
            u, v = vertices[a], vertices[b]
            bonds.append(bmap[(u, v) if u < v else (v, u)])
        return LabeledGraph(g, tuple(self.atoms[v] for v in vertices), tuple(bonds))


def _refine(g: Graph, node_labels: Sequence[int], edge_label: Mapping[tuple[int, int], int]) -> list[int]:
    """Color refinement with isomorphism-invariant color names (ranks)."""
    colors = [(int(node_labels[v]), len(g.neighbors[v])) for v in range(g.n)]
    ranks = _rank(colors)
    while True:
        sigs = [
            (ranks[v], tuple(sorted((edge_label[_key(v, w)], ranks[w]) for w in g.neighbors[v])))
            for v in range(g.n)
        ]
        new = _rank(sigs)
        if len(set(new)) == len(set(ranks)):
            return new
        ranks = new


def _rank(items: list) -> list[int]:
    order = {s: i for i, s in enumerate(sorted(set(items)))}
    return [order[s] for s in items]


def _key(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


def canonical_form(
    g: Graph,
    node_labels: Sequence[int] | None = None,
    edge_labels: Sequence[int] | None = None,
    max_nodes: int = CANONICAL_MAX_NODES,
) -> bytes:
    """Isomorphism certificate: equal output iff the (labeled) graphs are isomorphic."""
    return canonical_labeling(g, node_labels, edge_labels, max_nodes)[1]


def canonical_labeling(
    g: Graph,
    node_labels: Sequence[int] | None = None,
    edge_labels: Sequence[int] | None = None,
    max_nodes: int = CANONICAL_MAX_NODES,
) -> tuple[list[int], bytes]:
    """Canonical vertex order and the certificate it produces.

    Relabeling the graph so that ``order[k]`` becomes vertex ``k`` gives the
    same labeled graph for every member of an isomorphism class.

    The certificate is the lexicographically minimal upper-triangular adjacency
    encoding over every vertex ordering consistent with the color-refinement
    cells. The search is exhaustive over orderings, pruned only by exact
    lexicographic dominance and by twin vertices (swapping twins is an
    automorphism, so one representative suffices).
    """
    if g.n > max_nodes:
        raise UnsupportedSizeError(f"canonical_form supports n <= {max_nodes}, got {g.n}")
    n = g.n
    labels = [0] * n if node_labels is None else [int(x) for x in node_labels]
    if len(labels) != n:
        raise ValueError("node label count does not match vertex count")
    if edge_labels is None:
        elab = {e: 0 for e in g.edges}
    else:
        if len(edge_labels) != g.num_edges:
            raise ValueError("edge label count does not match edge count")
        elab = {e: int(b) for e, b in zip(g.edges, edge_labels)}

    colors = _refine(g, labels, elab)
    slots = sorted(colors)
    nbr = g.neighbor_sets

    def pair_code(u: int, v: int) -> int:
        return elab[_key(u, v)] + 1 if v in nbr[u] else 0

    coded = [{w: pair_code(v, w) for w in nbr[v]} for v in range(n)]

    def twins(u: int, v: int) -> bool:
        # transposition (u v) is an automorphism iff they agree off {u, v}
        cu = {w: c for w, c in coded[u].items() if w != v}
        cv = {w: c for w, c in coded[v].items() if w != u}
        return cu == cv

    best: list[tuple[int, ...]] | None = None
    best_order: list[int] = []
    order: list[int] = []
    rows: list[tuple[int, ...]] = []
    used = [False] * n

    def search(depth: int) -> None:
        # invariant: rows <= best[:depth]
        nonlocal best, best_order
        if depth == n:
            if best is None or rows < best:
                best = list(rows)
                best_order = list(order)
            return
        cands = [v for v in range(n) if not used[v] and colors[v] == slots[depth]]
        scored = [(tuple(pair_code(order[i], v) for i in range(depth)), v) for v in cands]
        low = min(r for r, _ in scored)
        if best is not None and low > best[depth] and rows == best[:depth]:
            return
        explored: list[int] = []
        for r, v in scored:
            if r != low or any(twins(u, v) for u in explored):
                continue
            explored.append(v)
            used[v] = True
            order.append(v)
            rows.append(r)
            search(depth + 1)
            rows.pop()
            order.pop()
            used[v] = False
            if best is not None and rows == best[:depth] and low > best[depth]:
                return

    search(0)
    lab_seq = [labels[v] for v in best_order]
    flat = [c for row in (best or []) for c in row]
    return best_order, json.dumps([n, lab_seq, flat], separators=(",", ":")).encode()


def graph_to_doc(g: Graph | LabeledGraph) -> dict:
    """JSON graph document ``{"n", "edges"}``; labeled graphs add ``atoms`` and ``bonds``."""
    if isinstance(g, LabeledGraph):
        doc = graph_to_doc(g.graph)
        doc["atoms"] = list(g.atoms)
        doc["bonds"] = list(g.bonds)
        return doc
    return {"n": g.n, "edges": [[u, v] for u, v in g.edges]}


def graph_from_doc(doc: Mapping) -> LabeledGraph:
    """Parse a graph document. Missing labels default to type 0.

    Bond labels, when present, are aligned with the document's edge list
    (not necessarily sorted).
    """
    n = int(doc["n"])
    pairs = [tuple(e) for e in doc.get("edges", [])]
    g = from_edge_list(n, pairs)
    atoms = tuple(int(a) for a in doc.get("atoms", ())) or (0,) * n
    if "bonds" in doc:
        if len(doc["bonds"]) != len(pairs):
            raise ValueError("bond labels must align with edges")
        bmap = {_key(int(u), int(v)): int(b) for (u, v), b in zip(pairs, doc["bonds"])}
        bonds = tuple(bmap[e] for e in g.edges)
    else:
        bonds = (0,) * g.num_edges
    return LabeledGraph(g, atoms, bonds)


def is_labeled_doc(doc: Mapping) -> bool:
    return "atoms" in doc or "bonds" in doc


def read_corpus(path) -> list[dict]:
    """Read a JSON-lines corpus, one graph document per non-empty line."""
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_corpus(path, docs: Iterable[Mapping]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n")
