"""Exact homomorphism counts and checks of hom-count behaviour under graph edits."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .graph import Graph, from_edge_list

__all__ = [
    "HomCheck",
    "HomReport",
    "PATTERNS",
    "PatternTooLargeError",
    "hom_count",
    "hom_density",
    "is_triangle_covered",
    "pattern",
    "predict_edit_homs",
    "triangles",
    "verify_triangle_covered_preservation",
]

MAX_PATTERN_NODES = 5
MAX_HOST_NODES = 12


class PatternTooLargeError(ValueError):
    """Raised when a pattern or host exceeds the exhaustive-enumeration bounds."""


def _complete(k: int) -> Graph:
    return from_edge_list(k, [(i, j) for i in range(k) for j in range(i + 1, k)])


PATTERNS: dict[str, Graph] = {
    "vertex": Graph(1, ()),
    "edge": Graph(2, ((0, 1),)),
    "path3": from_edge_list(3, [(0, 1), (1, 2)]),
    "triangle": _complete(3),
    "cycle4": from_edge_list(4, [(0, 1), (1, 2), (2, 3), (0, 3)]),
    "k4": _complete(4),
    "bowtie": from_edge_list(5, [(0, 1), (0, 2), (1, 2), (0, 3), (0, 4), (3, 4)]),
}


def pattern(name: str) -> Graph:
    try:
        return PATTERNS[name]
    except KeyError:
        raise ValueError(f"unknown pattern {name!r}; known: {sorted(PATTERNS)}") from None


def _order(f: Graph) -> list[int]:
    # visit each component breadth-first so later vertices have mapped neighbours
    order: list[int] = []
    seen = [False] * f.n
    for root in sorted(range(f.n), key=lambda v: -len(f.neighbors[v])):
        if seen[root]:
            continue
        seen[root] = True
        frontier = [root]
        while frontier:
            order.extend(frontier)
            nxt = []
            for u in frontier:
                for w in f.neighbors[u]:
                    if not seen[w]:
                        seen[w] = True
                        nxt.append(w)
            frontier = nxt
    return order


def hom_count(
    f: Graph,
    g: Graph,
    max_pattern: int = MAX_PATTERN_NODES,
    max_host: int | None = MAX_HOST_NODES,
) -> int:
    """Number of maps ``V(f) -> V(g)`` that send every edge of ``f`` to an edge of ``g``.

    Counted exactly by backtracking over pattern vertices; candidates for a
    vertex are restricted to common neighbours of its already-mapped
    neighbours, which prunes only maps that cannot be homomorphisms.

    Raises
    ------
    PatternTooLargeError
        If ``f`` has more than ``max_pattern`` vertices or ``g`` more than
        ``max_host`` (pass ``max_host=None`` to lift the host bound).
    """
    if f.n > max_pattern:
        raise PatternTooLargeError(f"pattern has {f.n} vertices, bound is {max_pattern}")
    if max_host is not None and g.n > max_host:
        raise PatternTooLargeError(f"host has {g.n} vertices, bound is {max_host}")
    if f.n == 0:
        return 1
    order = _order(f)
    pos = {v: i for i, v in enumerate(order)}
    back = [[pos[w] for w in f.neighbors[v] if pos[w] < i] for i, v in enumerate(order)]
    adj = g.neighbor_sets
    every = frozenset(range(g.n))
    image = [0] * f.n

    def extend(i: int) -> int:
        if i == f.n:
            return 1
        if back[i]:
            cands = adj[image[back[i][0]]]
            for j in back[i][1:]:
                cands = cands & adj[image[j]]
        else:
            cands = every
        if i == f.n - 1:
            return len(cands)
        total = 0
        for x in cands:
            image[i] = x
            total += extend(i + 1)
        return total

    return extend(0)


def hom_density(f: Graph, g: Graph, **bounds) -> float:
    if g.n < 1:
        raise ValueError("homomorphism density needs a non-empty host graph")
    return hom_count(f, g, **bounds) / g.n**f.n


def triangles(g: Graph) -> list[tuple[int, int, int]]:
    adj = g.neighbor_sets
    return [(u, v, w) for u, v in g.edges for w in adj[u] & adj[v] if w > v]


def is_triangle_covered(g: Graph) -> bool:
    covered = set()
    for t in triangles(g):
        covered.update(t)
    return len(covered) == g.n


def predict_edit_homs(kind: str, hom_v: int, hom_e: int, m: int, k: int = 0) -> tuple[int, int]:
    """Vertex and edge hom counts after attaching ``m`` star leaves or ``k`` rings totalling ``m`` vertices."""
    if kind == "star":
        return hom_v + m, hom_e + 2 * m
    if kind == "ring":
        return hom_v + m, hom_e + 2 * (m + k)
    raise ValueError(f"unknown edit kind {kind!r}")


@dataclass
class HomCheck:
    pattern: str
    before: int
    after: int
    density_before: float
    density_after: float
    equal: bool
    density_ok: bool

    def to_dict(self) -> dict:
        return {
            "pattern": self.pattern,
            "before": self.before,
            "after": self.after,
            "equal": self.equal,
            "density_ok": self.density_ok,
        }


@dataclass
class HomReport:
    checks: list[HomCheck] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.equal and c.density_ok for c in self.checks)


def _check_extension(before: Graph, after: Graph) -> None:
    n = before.n
    if after.n < n or after.induced(range(n)).edges != before.edges:
        raise ValueError("edited graph must keep the original graph on its first vertices")
    for t in triangles(after):
        if max(t) >= n:
            raise ValueError(
                "edit created a triangle through an added vertex; "
                "only star edits and rings of size > 3 preserve triangle-covered counts"
            )


def verify_triangle_covered_preservation(
    before: Graph,
    after: Graph,
    patterns: Sequence[Graph] | dict[str, Graph],
    tol: float = 1e-12,
    max_host: int | None = MAX_HOST_NODES,
) -> HomReport:
    """Compare counts of triangle-covered patterns before and after an additive edit.

    ``after`` must contain ``before`` as the subgraph induced on its first
    ``before.n`` vertices, with no triangle through an added vertex. Densities
    must satisfy ``t(F, after) = (n / (n + m))^|V(F)| t(F, before)``.
    """
    if isinstance(patterns, dict):
        named = list(patterns.items())
    else:
        named = [(f"pattern{i}", p) for i, p in enumerate(patterns)]
    for name, f in named:
        if not is_triangle_covered(f):
            raise ValueError(f"pattern {name} is not triangle-covered")
    _check_extension(before, after)
    n, n_after = before.n, after.n
    report = HomReport()
    for name, f in named:
        hb = hom_count(f, before, max_host=max_host)
        ha = hom_count(f, after, max_host=max_host)
        tb = hb / n**f.n if n else 0.0
        ta = ha / n_after**f.n if n_after else 0.0
        scaled = (n**f.n / n_after**f.n) * tb if n_after else 0.0
        report.checks.append(HomCheck(name, hb, ha, tb, ta, hb == ha, abs(ta - scaled) <= tol))
    return report
