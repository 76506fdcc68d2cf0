"""Graphon and graphette priors: sampling plus the four graph edit functions.

A graphon is represented as a piecewise-constant ``m x m`` grid (or a mixture
of grids). Sampling draws latents ``u_i ~ U[0, 1]``, maps them to cells
``min(m - 1, floor(m u_i))`` and flips one Bernoulli coin per vertex pair.
All randomness comes from an explicitly passed ``numpy.random.Generator``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

from .graph import Graph, from_edge_list

__all__ = [
    "CycleDeletion",
    "GraphEdit",
    "Graphette",
    "GraphetteSample",
    "Graphon",
    "Identity",
    "RingAddition",
    "SparsitySchedule",
    "StarAddition",
    "apply_edit",
    "attach_rings",
    "attach_stars",
    "constant_graphon",
    "cycle_deletion",
    "egonet_graphon",
    "graphette_from_config",
    "graphette_to_config",
    "mean_value",
    "mixture_graphon",
    "ring_addition",
    "ring_addition_budgeted",
    "sample_graphette",
    "sample_graphette_trace",
    "sample_graphon",
    "sample_sparsified",
    "sbm_graphon",
    "star_addition",
    "named_prior",
]

PRIOR_NAMES = ("community", "tree", "egonet", "molecular")


@dataclass(frozen=True, eq=False)
class Graphon:
    """Piecewise-constant graphon, or a mixture of them.

    Exactly one of ``values`` (symmetric grid with entries in [0, 1]) and
    ``mixture`` (``(weight, Graphon)`` pairs with weights summing to 1) is set.
    """

    values: np.ndarray | None = None
    mixture: tuple[tuple[float, "Graphon"], ...] = ()

    def __post_init__(self) -> None:
        if (self.values is None) == (not self.mixture):
            raise ValueError("set exactly one of values and mixture")
        if self.values is not None:
            v = np.array(self.values, dtype=np.float64)
            if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] < 1:
                raise ValueError("graphon values must be a non-empty square grid")
            if not np.array_equal(v, v.T):
                raise ValueError("graphon values must be symmetric")
            if v.min() < 0.0 or v.max() > 1.0:
                raise ValueError("graphon values must lie in [0, 1]")
            v.setflags(write=False)
            object.__setattr__(self, "values", v)
        else:
            weights = [float(w) for w, _ in self.mixture]
            if min(weights) < 0 or abs(sum(weights) - 1.0) > 1e-12:
                raise ValueError("mixture weights must be nonnegative and sum to 1")

    @property
    def m(self) -> int:
        if self.values is None:
            raise AttributeError("mixture graphons have no single resolution")
        return self.values.shape[0]


def constant_graphon(p: float, m: int = 1) -> Graphon:
    return Graphon(np.full((m, m), float(p)))


def sbm_graphon(k: int, p_in: float, p_out: float) -> Graphon:
    """Equal-sized ``k``-block stochastic block model."""
    values = np.full((k, k), float(p_out))
    np.fill_diagonal(values, float(p_in))
    return Graphon(values)


def egonet_graphon(m: int = 10, rate: float = 10.0 / 3.0) -> Graphon:
    """``W(x, y) = exp(-rate (x + y))`` evaluated at the cell centers of an ``m``-grid."""
    centers = (np.arange(m) + 0.5) / m
    return Graphon(np.exp(-rate * (centers[:, None] + centers[None, :])))


def mixture_graphon(components: Sequence[tuple[float, Graphon]]) -> Graphon:
    return Graphon(mixture=tuple((float(w), g) for w, g in components))


def mean_value(w: Graphon) -> float:
    if w.values is not None:
        return float(w.values.mean())
    return float(sum(wt * mean_value(c) for wt, c in w.mixture))


@dataclass(frozen=True)
class SparsitySchedule:
    """``constant``: ``rho_n = value``; ``inverse_mean_degree``: ``rho_n = 1/(Wbar n) + value``.

    Evaluated values are clamped to [0, 1].
    """

    kind: str = "constant"
    value: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("constant", "inverse_mean_degree"):
            raise ValueError(f"unknown sparsity schedule {self.kind!r}")
        if self.kind == "constant" and not 0.0 <= self.value <= 1.0:
            raise ValueError("constant rho must lie in [0, 1]")

    @classmethod
    def constant(cls, rho: float = 1.0) -> SparsitySchedule:
        return cls("constant", float(rho))

    @classmethod
    def inverse_mean_degree(cls, eps: float = 0.01) -> SparsitySchedule:
        return cls("inverse_mean_degree", float(eps))

    def rho(self, n: int, w: Graphon) -> float:
        if self.kind == "constant":
            return self.value
        wbar = mean_value(w)
        if wbar <= 0.0 or n <= 0:
            return 1.0
        return min(1.0, max(0.0, 1.0 / (wbar * n) + self.value))


@dataclass(frozen=True)
class Identity:
    pass


@dataclass(frozen=True)
class CycleDeletion:
    pass


@dataclass(frozen=True)
class RingAddition:
    p: float = 0.2
    c: int = 5

    def __post_init__(self) -> None:
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("ring probability must lie in [0, 1]")
        if self.c < 3:
            raise ValueError("ring size must be at least 3")


@dataclass(frozen=True)
class StarAddition:
    a: float = 0.05
    b: float = 0.2

    def __post_init__(self) -> None:
        if self.a <= 0.0:
            raise ValueError("star rate must be positive")
        if abs(self.b) >= 1.0:
            raise ValueError("star offset must satisfy |b| < 1")


GraphEdit = Union[Identity, CycleDeletion, RingAddition, StarAddition]


@dataclass(frozen=True, eq=False)
class Graphette:
    w: Graphon
    rho: SparsitySchedule = field(default_factory=SparsitySchedule)
    edits: tuple[GraphEdit, ...] = ()


def _sample_latent_graph(w: Graphon, scale: float, n: int, rng: np.random.Generator) -> tuple[Graph, np.ndarray]:
    while w.values is None:
        weights = np.array([wt for wt, _ in w.mixture])
        k = int(np.searchsorted(np.cumsum(weights), rng.random(), side="right"))
        w = w.mixture[min(k, len(w.mixture) - 1)][1]
    u = rng.random(n)
    m = w.values.shape[0]
    cells = np.minimum(m - 1, np.floor(m * u).astype(np.int64))
    iu, ju = np.triu_indices(n, 1)
    probs = scale * w.values[cells[iu], cells[ju]]
    hits = rng.random(iu.size) < probs
    g = Graph(n, tuple(zip(iu[hits].tolist(), ju[hits].tolist())))
    return g, u


def sample_graphon(w: Graphon, n: int, rng: np.random.Generator) -> Graph:
    """Draw a graph on ``n`` vertices from ``w`` (one mixture component per graph)."""
    return _sample_latent_graph(w, 1.0, n, rng)[0]


def sample_sparsified(w: Graphon, rho: SparsitySchedule, n: int, rng: np.random.Generator) -> Graph:
    return _sample_latent_graph(w, rho.rho(n, w), n, rng)[0]


def cycle_deletion(g: Graph) -> Graph:
    """Breadth-first spanning forest, rooted at the lowest unvisited id, neighbors ascending."""
    seen = [False] * g.n
    kept = []
    for root in range(g.n):
        if seen[root]:
            continue
        seen[root] = True
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for w in g.neighbors[u]:
                if not seen[w]:
                    seen[w] = True
                    kept.append((u, w))
                    queue.append(w)
    return from_edge_list(g.n, kept)


def attach_rings(g: Graph, anchors: Sequence[int], sizes: Sequence[int] | int, ring_vertices: Sequence[int]) -> Graph:
    """Append one fresh cycle per anchor and join ``ring_vertices[k]`` of ring ``k`` to its anchor."""
    if isinstance(sizes, int):
        sizes = [sizes] * len(anchors)
    pairs = list(g.edges)
    n = g.n
    for anchor, c, r in zip(anchors, sizes, ring_vertices):
        if c < 3:
            raise ValueError("ring size must be at least 3")
        if not 0 <= r < c:
            raise ValueError("ring attachment vertex out of range")
        pairs.extend((n + i, n + (i + 1) % c) for i in range(c))
        pairs.append((anchor, n + r))
        n += c
    return from_edge_list(n, pairs)


def ring_addition(
    g: Graph, p: float, c: int, rng: np.random.Generator, budget: int | None = None
) -> Graph:
    """Attach a fresh ``c``-cycle to each vertex independently with probability ``p``.

    With a ``budget``, rings that would push the vertex count past it are
    skipped (never truncated), so every added ring has exactly ``c`` vertices.
    """
    if c < 3:
        raise ValueError("ring size must be at least 3")
    success = np.flatnonzero(rng.random(g.n) < p)
    picks = rng.integers(c, size=success.size)
    anchors, chosen = [], []
    total = g.n
    for v, r in zip(success.tolist(), picks.tolist()):
        if budget is not None and total + c > budget:
            continue
        anchors.append(v)
        chosen.append(r)
        total += c
    return attach_rings(g, anchors, c, chosen)


def ring_addition_budgeted(
    g: Graph, counts: Sequence[tuple[int, int]], budget: int, rng: np.random.Generator
) -> Graph:
    """Attach ``count`` rings of each ``size`` while staying within ``budget`` vertices.

    A ring that does not fit is shrunk to the remaining budget, and dropped if
    that leaves fewer than 3 vertices. Each ring joins a uniformly chosen
    existing vertex to a uniformly chosen ring vertex.
    """
    if budget < g.n:
        raise ValueError(f"budget {budget} is below the current vertex count {g.n}")
    pairs = list(g.edges)
    n = g.n
    for size, count in counts:
        for _ in range(count):
            rem = budget - n
            if rem <= 0:
                break
            s = min(size, rem)
            if s < 3:
                continue
            if n == 0:
                # nothing to attach to; the ring stays a separate component
                pairs.extend((i, (i + 1) % s) for i in range(s))
                n = s
                continue
            v = int(rng.integers(n))
            w = int(rng.integers(s))
            pairs.extend((n + i, n + (i + 1) % s) for i in range(s))
            pairs.append((v, n + w))
            n += s
    return from_edge_list(n, pairs)


def attach_stars(g: Graph, counts: Sequence[int]) -> Graph:
    """Hang ``counts[i]`` fresh degree-1 leaves on vertex ``i``."""
    if len(counts) != g.n:
        raise ValueError("need one star size per vertex")
    pairs = list(g.edges)
    n = g.n
    for i, s in enumerate(counts):
        for _ in range(int(s)):
            pairs.append((i, n))
            n += 1
    return from_edge_list(n, pairs)


def star_addition(
    g: Graph,
    a: float,
    b: float,
    u: Sequence[float],
    rng: np.random.Generator,
    budget: int | None = None,
) -> Graph:
    """Attach ``Poisson(a n exp(u_i + b))`` leaves to each vertex ``i``.

    With a ``budget`` the draws are capped, in vertex order, by the remaining room.
    """
    if a <= 0 or abs(b) >= 1:
        raise ValueError("star addition needs a > 0 and |b| < 1")
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (g.n,):
        raise ValueError(f"expected {g.n} latents, got shape {u.shape}")
    counts = rng.poisson(a * g.n * np.exp(u + b))
    if budget is not None:
        room = max(0, budget - g.n)
        capped = []
        for s in counts.tolist():
            s = min(s, room)
            room -= s
            capped.append(s)
        counts = capped
    return attach_stars(g, counts)


def apply_edit(
    edit: GraphEdit,
    g: Graph,
    rng: np.random.Generator,
    latents: np.ndarray | None = None,
    budget: int | None = None,
) -> tuple[Graph, np.ndarray]:
    """Apply one edit and carry per-vertex latents along.

    Vertices added by an edit get fresh uniform latents, drawn only if a later
    star edit needs them.
    """
    if latents is None:
        latents = np.full(g.n, np.nan)
    if isinstance(edit, Identity):
        return g, latents
    if isinstance(edit, CycleDeletion):
        return cycle_deletion(g), latents
    if isinstance(edit, RingAddition):
        out = ring_addition(g, edit.p, edit.c, rng, budget=budget)
    elif isinstance(edit, StarAddition):
        missing = np.isnan(latents)
        if missing.any():
            latents = latents.copy()
            latents[missing] = rng.random(int(missing.sum()))
        out = star_addition(g, edit.a, edit.b, latents, rng, budget=budget)
    else:
        raise TypeError(f"unknown graph edit {edit!r}")
    return out, np.concatenate([latents, np.full(out.n - g.n, np.nan)])


@dataclass(frozen=True, eq=False)
class GraphetteSample:
    """A graphette draw together with the pre-edit graph ``G'`` and its latents."""

    graph: Graph
    base: Graph
    latents: np.ndarray


def sample_graphette_trace(
    gw: Graphette,
    n: int,
    rng: np.random.Generator,
    largest_component: bool = True,
    budget: int | None = None,
) -> GraphetteSample:
    """Like :func:`sample_graphette` but also returns ``G'``.

    ``budget`` (default ``n``) caps the vertex count after edits, so ``G'``
    can be sampled on fewer vertices than the edited graph may reach.
    """
    if n < 1:
        raise ValueError("need at least one vertex")
    budget = n if budget is None else budget
    if budget < n:
        raise ValueError("budget must be at least n")
    g, u = _sample_latent_graph(gw.w, gw.rho.rho(n, gw.w), n, rng)
    if largest_component and g.n:
        comps = g.components()
        keep = max(comps, key=lambda c: (len(c), -c[0]))
        g, u = g.induced(keep), u[keep]
    base, base_u = g, u
    for edit in gw.edits:
        g, u = apply_edit(edit, g, rng, latents=u, budget=budget)
    if g.n > budget:
        keep = np.sort(rng.choice(g.n, size=budget, replace=False)).tolist()
        g = g.induced(keep)
    return GraphetteSample(g, base, base_u)


def sample_graphette(
    gw: Graphette, n: int, rng: np.random.Generator, largest_component: bool = True
) -> Graph:
    """Sample ``G'`` from the sparsified graphon, keep its largest component, then edit.

    Additive edits respect the node budget ``n``; star edits reuse the
    latents drawn for ``G'``. With ``largest_component=False`` and no edits
    the output is exactly ``sample_sparsified`` under the same generator state.
    """
    return sample_graphette_trace(gw, n, rng, largest_component).graph


def named_prior(name: str, **params) -> Graphette:
    """The benchmark priors: ``community``, ``tree``, ``egonet`` and ``molecular``.

    Keyword overrides: ``eps`` (sparsity offset, default 0.01), ``m`` (egonet
    grid, 10), ``p``/``c`` (ring probability/size; egonet 0.2/5, molecular
    0.2/6), ``a``/``b`` (star rate/offset, 0.05/0.2), ``blocks`` (community
    block counts, 2..5), ``p_in``/``p_out`` (0.3/0.05).
    """
    eps = params.get("eps", 0.01)
    if name == "community":
        blocks = params.get("blocks", (2, 3, 4, 5))
        comps = [(1.0 / len(blocks), sbm_graphon(k, params.get("p_in", 0.3), params.get("p_out", 0.05))) for k in blocks]
        w = comps[0][1] if len(comps) == 1 else mixture_graphon(comps)
        return Graphette(w, SparsitySchedule.constant(1.0), (Identity(),))
    if name == "tree":
        return Graphette(constant_graphon(0.2), SparsitySchedule.inverse_mean_degree(eps), (CycleDeletion(),))
    if name == "egonet":
        edits = (
            StarAddition(params.get("a", 0.05), params.get("b", 0.2)),
            RingAddition(params.get("p", 0.2), params.get("c", 5)),
        )
        return Graphette(egonet_graphon(params.get("m", 10)), SparsitySchedule.constant(1.0), edits)
    if name == "molecular":
        edits = (RingAddition(params.get("p", 0.2), params.get("c", 6)),)
        return Graphette(constant_graphon(0.2), SparsitySchedule.inverse_mean_degree(eps), edits)
    raise ValueError(f"unknown prior {name!r}; expected one of {PRIOR_NAMES}")


def _graphon_from_config(cfg: Mapping) -> Graphon:
    if "mixture" in cfg:
        return mixture_graphon([(c["weight"], _graphon_from_config(c["graphon"])) for c in cfg["mixture"]])
    values = np.array(cfg["values"], dtype=np.float64)
    if "m" in cfg and values.shape[0] != int(cfg["m"]):
        raise ValueError("graphon 'm' does not match the values grid")
    return Graphon(values)


def _graphon_to_config(w: Graphon) -> dict:
    if w.values is None:
        return {"mixture": [{"weight": wt, "graphon": _graphon_to_config(c)} for wt, c in w.mixture]}
    return {"m": w.m, "values": w.values.tolist()}


_EDIT_KINDS = {
    "identity": Identity,
    "cycle_deletion": CycleDeletion,
    "ring_addition": RingAddition,
    "star_addition": StarAddition,
}


def graphette_from_config(cfg: Mapping) -> Graphette:
    """Parse a prior config.

    Either ``{"prior": name, "params": {...}}`` for a benchmark prior, or
    ``{"graphon": ..., "rho": {"kind": ..., "value": ...}, "edits": [...]}``.
    """
    if "prior" in cfg:
        return named_prior(cfg["prior"], **cfg.get("params", {}))
    w = _graphon_from_config(cfg["graphon"])
    rho_cfg = cfg.get("rho", {"kind": "constant", "value": 1.0})
    rho = SparsitySchedule(rho_cfg.get("kind", "constant"), float(rho_cfg.get("value", 1.0)))
    edits = []
    for e in cfg.get("edits", []):
        e = dict(e)
        kind = e.pop("kind")
        if kind not in _EDIT_KINDS:
            raise ValueError(f"unknown edit kind {kind!r}")
        edits.append(_EDIT_KINDS[kind](**e))
    return Graphette(w, rho, tuple(edits))


def graphette_to_config(gw: Graphette) -> dict:
    names = {v: k for k, v in _EDIT_KINDS.items()}
    edits = []
    for e in gw.edits:
        d = {"kind": names[type(e)]}
        d.update({k: getattr(e, k) for k in e.__dataclass_fields__})
        edits.append(d)
    return {
        "graphon": _graphon_to_config(gw.w),
        "rho": {"kind": gw.rho.kind, "value": gw.rho.value},
        "edits": edits,
    }

