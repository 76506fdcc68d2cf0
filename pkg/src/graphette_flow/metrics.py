"""Graph statistics for evaluating generated corpora.

Degree and clustering histograms, graphlet orbit counts (graphlets with up
to four vertices, orbits numbered 0-14 in the usual orbit-counting
convention), Gaussian-kernel MMD^2, the ratio against a train/test
baseline, and validity/uniqueness/novelty for small labeled graphs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .flow import ChemistryTable
from .graph import DegenerateGraphWarning, Graph, LabeledGraph, canonical_form

__all__ = [
    "GraphDescriptor",
    "NUM_ORBITS",
    "clustering_coefficients",
    "clustering_hist",
    "degree_hist",
    "describe",
    "mmd_squared",
    "orbit_counts",
    "orbit_matrix",
    "pooled_bandwidth",
    "ratio",
    "vun",
]

NUM_ORBITS = 15
MAX_ORBIT_NODES = 64
KINDS = ("degree_hist", "clustering_hist", "orbit_counts")


@dataclass(frozen=True, eq=False)
class GraphDescriptor:
    kind: str
    vector: np.ndarray
    per_node: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown descriptor kind {self.kind!r}")
        v = np.asarray(self.vector, dtype=np.float64)
        if v.ndim != 1 or not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("descriptor vectors must be finite, nonnegative and one-dimensional")
        object.__setattr__(self, "vector", v)


def _normalized(counts: np.ndarray, n: int, kind: str) -> GraphDescriptor:
    if n == 0:
        warnings.warn("histogram of an empty graph is all zeros", DegenerateGraphWarning, stacklevel=3)
        return GraphDescriptor(kind, counts.astype(np.float64))
    return GraphDescriptor(kind, counts / n)


def degree_hist(g: Graph, max_deg: int | None = None) -> GraphDescriptor:
    """Normalized degree histogram over ``0..max_deg``; larger degrees land in the last bucket."""
    deg = g.degrees()
    top = int(deg.max()) if deg.size else 0
    max_deg = top if max_deg is None else max_deg
    counts = np.bincount(np.minimum(deg, max_deg), minlength=max_deg + 1)
    return _normalized(counts, g.n, "degree_hist")


def clustering_coefficients(g: Graph) -> np.ndarray:
    adj = g.neighbor_sets
    out = np.zeros(g.n)
    for i in range(g.n):
        d = len(adj[i])
        if d >= 2:
            tri = sum(len(adj[i] & adj[j]) for j in adj[i]) // 2
            out[i] = 2.0 * tri / (d * (d - 1))
    return out


def clustering_hist(g: Graph, bins: int = 100) -> GraphDescriptor:
    """Normalized histogram of local clustering coefficients over ``bins`` equal bins of [0, 1]."""
    if bins < 1:
        raise ValueError("need at least one bin")
    idx = np.minimum(bins - 1, np.floor(clustering_coefficients(g) * bins).astype(np.int64))
    return _normalized(np.bincount(idx, minlength=bins), g.n, "clustering_hist")


def _connected_subsets(g: Graph, k: int):
    """Yield every connected vertex subset of size 2..k exactly once (ESU enumeration)."""
    adj = g.neighbor_sets

    def extend(sub: list[int], ext: set[int], nbhd: set[int], root: int):
        yield sub
        if len(sub) == k:
            return
        ext = set(ext)
        while ext:
            w = ext.pop()
            fresh = {u for u in adj[w] if u > root and u not in nbhd}
            yield from extend(sub + [w], ext | fresh, nbhd | adj[w], root)

    for v in range(g.n):
        nbhd = set(adj[v]) | {v}
        ext = {u for u in adj[v] if u > v}
        for sub in extend([v], ext, nbhd, v):
            if len(sub) >= 2:
                yield sub


def _orbits_of(sub: Sequence[int], adj) -> list[int]:
    k = len(sub)
    deg = [sum(1 for w in sub if w in adj[v]) for v in sub]
    m = sum(deg) // 2
    if k == 2:
        return [0, 0]
    if k == 3:
        return [3] * 3 if m == 3 else [1 if d == 1 else 2 for d in deg]
    if m == 3:
        if 3 in deg:
            return [7 if d == 3 else 6 for d in deg]
        return [4 if d == 1 else 5 for d in deg]
    if m == 4:
        if 3 in deg:
            return [{1: 9, 2: 10, 3: 11}[d] for d in deg]
        return [8] * 4
    if m == 5:
        return [13 if d == 3 else 12 for d in deg]
    return [14] * 4


def orbit_matrix(g: Graph, max_nodes: int = MAX_ORBIT_NODES) -> np.ndarray:
    """Per-vertex integer orbit counts, shape ``(n, 15)``."""
    if g.n > max_nodes:
        raise ValueError(f"orbit counting supports n <= {max_nodes}, got {g.n}")
    out = np.zeros((g.n, NUM_ORBITS), dtype=np.int64)
    adj = g.neighbor_sets
    for sub in _connected_subsets(g, 4):
        for v, o in zip(sub, _orbits_of(sub, adj)):
            out[v, o] += 1
    return out


def orbit_counts(g: Graph, max_nodes: int = MAX_ORBIT_NODES) -> GraphDescriptor:
    """Mean orbit-count vector over vertices; the integer per-vertex table is kept in ``per_node``."""
    per_node = orbit_matrix(g, max_nodes)
    vec = per_node.mean(axis=0) if g.n else np.zeros(NUM_ORBITS)
    return GraphDescriptor("orbit_counts", vec, per_node)


def describe(graphs: Sequence[Graph], kind: str) -> list[GraphDescriptor]:
    fn = {"degree_hist": degree_hist, "clustering_hist": clustering_hist, "orbit_counts": orbit_counts}[kind]
    return [fn(g) for g in graphs]


def _stack(sets: Sequence[Sequence[GraphDescriptor]]) -> list[np.ndarray]:
    kinds = {d.kind for s in sets for d in s}
    if len(kinds) > 1:
        raise ValueError(f"cannot compare descriptor kinds {sorted(kinds)}")
    for s in sets:
        if len(s) == 0:
            raise ValueError("descriptor sets must be non-empty")
    width = max(d.vector.size for s in sets for d in s)
    return [np.array([np.pad(d.vector, (0, width - d.vector.size)) for d in s]) for s in sets]


def _sqdist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def pooled_bandwidth(*sets: Sequence[GraphDescriptor]) -> float:
    """Median pairwise distance over the pooled descriptors (1.0 if that median is zero)."""
    pooled = np.vstack(_stack(sets))
    iu = np.triu_indices(len(pooled), 1)
    if iu[0].size == 0:
        return 1.0
    med = float(np.median(np.sqrt(_sqdist(pooled, pooled)[iu])))
    return med if med > 0 else 1.0


def mmd_squared(
    set_a: Sequence[GraphDescriptor], set_b: Sequence[GraphDescriptor], bandwidth: float | None = None
) -> float:
    """Biased Gaussian-kernel MMD^2 ``mean k(A, A) + mean k(B, B) - 2 mean k(A, B)``."""
    a, b = _stack([set_a, set_b])
    sigma = pooled_bandwidth(set_a, set_b) if bandwidth is None else float(bandwidth)
    if sigma <= 0:
        raise ValueError("bandwidth must be positive")
    scale = 2.0 * sigma * sigma
    kaa = np.exp(-_sqdist(a, a) / scale).mean()
    kbb = np.exp(-_sqdist(b, b) / scale).mean()
    kab = np.exp(-_sqdist(a, b) / scale).mean()
    return float(kaa + kbb - 2.0 * kab)


def ratio(
    gen: Sequence[GraphDescriptor],
    train: Sequence[GraphDescriptor],
    test: Sequence[GraphDescriptor],
    bandwidth: float | None = None,
) -> float:
    """``MMD^2(gen, test) / MMD^2(train, test)`` with one bandwidth for both terms.

    Returns NaN and warns when the denominator is at most 1e-15.
    """
    sigma = pooled_bandwidth(gen, train, test) if bandwidth is None else bandwidth
    den = mmd_squared(train, test, sigma)
    if den <= 1e-15:
        warnings.warn("train/test MMD^2 is degenerate; ratio undefined", DegenerateGraphWarning, stacklevel=2)
        return float("nan")
    return mmd_squared(gen, test, sigma) / den


def _certificate(lg: LabeledGraph | Graph) -> bytes:
    if isinstance(lg, Graph):
        return canonical_form(lg)
    return canonical_form(lg.graph, lg.atoms, lg.bonds)


def vun(
    samples: Sequence[LabeledGraph | Graph],
    train: Sequence[LabeledGraph | Graph],
    chem: ChemistryTable | None = None,
) -> tuple[float, float, float]:
    """Validity, uniqueness and novelty percentages.

    Validity is valence-cap feasibility (every sample is valid without a
    chemistry table). Uniqueness and novelty are fractions of the valid samples.
    """
    if not samples:
        return 0.0, 0.0, 0.0
    valid = []
    for s in samples:
        if chem is None or isinstance(s, Graph) or chem.is_valid(s):
            valid.append(_certificate(s))
    if not valid:
        return 0.0, 0.0, 0.0
    seen = {_certificate(t) for t in train}
    pct = 100.0 / len(valid)
    return (
        100.0 * len(valid) / len(samples),
        len(set(valid)) * pct,
        sum(1 for c in valid if c not in seen) * pct,
    )
