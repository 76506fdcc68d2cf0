"""Structure-aware coupling: structural embeddings, fused Gromov-Wasserstein and matching."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment, linprog

from .graph import CANONICAL_MAX_NODES, Graph, LabeledGraph, _refine, canonical_labeling, permute

__all__ = [
    "AttributedGraph",
    "FgwConfig",
    "FgwResult",
    "TransportPlan",
    "align_nodes",
    "batch_fgw",
    "feature_cost",
    "fgw_objective",
    "gw_loss",
    "hungarian",
    "intra_cost",
    "solve_fgw",
    "structural_embedding",
]

# replicated assignment is used for the unequal-size OT subproblem up to this size
_REPLICATE_LIMIT = 600


@dataclass(frozen=True, eq=False)
class AttributedGraph:
    """Topology plus node features ``X`` (``n x d_x``) and edge features ``F`` (``n x n x d_f``)."""

    g: Graph
    X: np.ndarray
    F: np.ndarray | None = None

    def __post_init__(self) -> None:
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        if X.shape[0] != self.g.n:
            raise ValueError(f"X has {X.shape[0]} rows for a graph on {self.g.n} vertices")
        object.__setattr__(self, "X", X)
        if self.F is not None:
            F = np.asarray(self.F, dtype=np.float64)
            if F.ndim != 3 or F.shape[:2] != (self.g.n, self.g.n):
                raise ValueError("F must have shape (n, n, d_f)")
            if not np.array_equal(F, F.transpose(1, 0, 2)):
                raise ValueError("F must be symmetric in its first two indices")
            if self.g.n and np.any(F[np.arange(self.g.n), np.arange(self.g.n)] != 0):
                raise ValueError("F must have a zero diagonal")
            object.__setattr__(self, "F", F)

    @property
    def n(self) -> int:
        return self.g.n

    @classmethod
    def from_graph(cls, g: Graph) -> AttributedGraph:
        """Unlabeled graph with a single constant node feature."""
        return cls(g, np.ones((g.n, 1)))

    @classmethod
    def from_labeled(cls, lg: LabeledGraph, n_atom_types: int, n_bond_types: int) -> AttributedGraph:
        n = lg.n
        X = np.zeros((n, n_atom_types))
        X[np.arange(n), list(lg.atoms)] = 1.0
        F = np.zeros((n, n, n_bond_types))
        for (u, v), b in zip(lg.graph.edges, lg.bonds):
            F[u, v, b] = F[v, u, b] = 1.0
        return cls(lg.graph, X, F)

    def permute(self, perm: Sequence[int]) -> AttributedGraph:
        """Vertex ``u`` becomes ``perm[u]``."""
        inv = np.argsort(np.asarray(perm))
        F = None if self.F is None else self.F[np.ix_(inv, inv)]
        return AttributedGraph(permute(self.g, perm), self.X[inv], F)


@dataclass(frozen=True)
class FgwConfig:
    alpha: float = 0.5
    max_iters: int = 200
    tol: float = 1e-7
    embed_steps: int = 4

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.embed_steps < 1:
            raise ValueError("embed_steps must be at least 1")


@dataclass(eq=False)
class TransportPlan:
    T: np.ndarray
    p: np.ndarray
    q: np.ndarray

    def marginal_error(self) -> float:
        return float(max(np.abs(self.T.sum(1) - self.p).max(), np.abs(self.T.sum(0) - self.q).max()))


@dataclass(eq=False)
class FgwResult:
    value: float
    plan: TransportPlan
    converged: bool
    iterations: int
    # objective and marginal error at every Frank-Wolfe iterate of the returned run
    history: list[float] = field(default_factory=list)
    marginal_errors: list[float] = field(default_factory=list)

    def __iter__(self):
        yield self.value
        yield self.plan


def _return_probabilities(g: Graph, k: int) -> list[list[Fraction]]:
    # lazy walk P = (I + D^-1 A) / 2; isolated vertices stay put
    deg = [len(nb) for nb in g.neighbors]
    half = Fraction(1, 2)
    out = []
    for i in range(g.n):
        v = {i: Fraction(1)}
        row = []
        for _ in range(k):
            nxt: dict[int, Fraction] = {}
            for u, mass in v.items():
                if deg[u] == 0:
                    nxt[u] = nxt.get(u, 0) + mass
                    continue
                nxt[u] = nxt.get(u, 0) + mass * half
                share = mass * half / deg[u]
                for w in g.neighbors[u]:
                    nxt[w] = nxt.get(w, 0) + share
            v = nxt
            row.append(v.get(i, Fraction(0)))
        out.append(row)
    return out


def structural_embedding(g: Graph | AttributedGraph, k: int = 4) -> np.ndarray:
    """Per-vertex rows ``[deg/(n-1), clustering, r_1, ..., r_k]``.

    ``r_t`` is the probability that a lazy random walk started at the vertex
    is back there after ``t`` steps. Everything is computed in exact rational
    arithmetic before rounding, so relabeling the graph permutes the rows
    without changing a single bit.
    """
    if k < 1:
        raise ValueError("need at least one walk step")
    if isinstance(g, AttributedGraph):
        g = g.g
    n = g.n
    adj = g.neighbor_sets
    z = np.zeros((n, 2 + k))
    ret = _return_probabilities(g, k)
    for i in range(n):
        d = len(adj[i])
        z[i, 0] = float(Fraction(d, n - 1)) if n > 1 else 0.0
        if d >= 2:
            tri = sum(len(adj[i] & adj[j]) for j in adj[i]) // 2
            z[i, 1] = float(Fraction(2 * tri, d * (d - 1)))
        z[i, 2:] = [float(x) for x in ret[i]]
    return z


def intra_cost(z: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances between embedding rows."""
    z = np.asarray(z, dtype=np.float64)
    diff = z[:, None, :] - z[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def feature_cost(x0: np.ndarray, x1: np.ndarray) -> np.ndarray:
    x0 = np.asarray(x0, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    if x0.ndim != 2 or x1.ndim != 2 or x0.shape[1] != x1.shape[1]:
        raise ValueError(f"feature dimensions differ: {x0.shape} vs {x1.shape}")
    diff = x0[:, None, :] - x1[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _check_shapes(T: np.ndarray, C0: np.ndarray, C1: np.ndarray, M: np.ndarray | None = None) -> None:
    n0, n1 = T.shape
    if C0.shape != (n0, n0) or C1.shape != (n1, n1):
        raise ValueError(f"cost shapes {C0.shape}, {C1.shape} do not match plan {T.shape}")
    if M is not None and M.shape != T.shape:
        raise ValueError(f"feature cost shape {M.shape} does not match plan {T.shape}")


def gw_loss(T: np.ndarray, C0: np.ndarray, C1: np.ndarray) -> float:
    """Squared-loss Gromov-Wasserstein term ``sum (C0_ik - C1_jl)^2 T_ij T_kl``.

    Evaluated in factorized form with the marginals of ``T`` itself.
    """
    T, C0, C1 = (np.asarray(a, dtype=np.float64) for a in (T, C0, C1))
    _check_shapes(T, C0, C1)
    p, q = T.sum(1), T.sum(0)
    const = np.outer((C0 * C0) @ p, np.ones(T.shape[1])) + np.outer(np.ones(T.shape[0]), (C1 * C1) @ q)
    return float(np.sum((const - 2.0 * C0 @ T @ C1.T) * T))


def fgw_objective(T: np.ndarray, M: np.ndarray, C0: np.ndarray, C1: np.ndarray, alpha: float) -> float:
    T, M = np.asarray(T, dtype=np.float64), np.asarray(M, dtype=np.float64)
    _check_shapes(T, np.asarray(C0), np.asarray(C1), M)
    return float((1.0 - alpha) * np.sum(M * T) + alpha * gw_loss(T, C0, C1))


def _linear_ot(G: np.ndarray) -> np.ndarray:
    """Vertex of the uniform-marginal transport polytope minimizing ``<G, S>``."""
    n0, n1 = G.shape
    if n0 == n1:
        rows, cols = linear_sum_assignment(G)
        S = np.zeros_like(G)
        S[rows, cols] = 1.0 / n0
        return S
    L = n0 * n1 // math.gcd(n0, n1)
    if L <= _REPLICATE_LIMIT:
        # uniform marginals become an assignment between replicated copies
        big = np.repeat(np.repeat(G, L // n0, axis=0), L // n1, axis=1)
        rows, cols = linear_sum_assignment(big)
        S = np.zeros_like(G)
        np.add.at(S, (rows // (L // n0), cols // (L // n1)), 1.0 / L)
        return S
    A_eq = np.vstack([np.kron(np.eye(n0), np.ones(n1)), np.kron(np.ones(n0), np.eye(n1))])
    b_eq = np.concatenate([np.full(n0, 1.0 / n0), np.full(n1, 1.0 / n1)])
    res = linprog(G.ravel(), A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs-ds")
    if not res.success:
        raise RuntimeError(f"transport subproblem failed: {res.message}")
    return np.clip(res.x.reshape(n0, n1), 0.0, None)


def _frank_wolfe(M, C0, C1, alpha, T, max_iters, tol):
    n0, n1 = T.shape
    p, q = np.full(n0, 1.0 / n0), np.full(n1, 1.0 / n1)
    const = np.outer((C0 * C0) @ p, np.ones(n1)) + np.outer(np.ones(n0), (C1 * C1) @ q)
    value = fgw_objective(T, M, C0, C1, alpha)
    history = [value]
    marg = [TransportPlan(T, p, q).marginal_error()]
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        CTC = C0 @ T @ C1
        grad = (1.0 - alpha) * M + 2.0 * alpha * (const - 2.0 * CTC)
        D = _linear_ot(grad) - T
        # the objective along T + tau D is a*tau^2 + b*tau + const
        a = -2.0 * alpha * np.sum((C0 @ D @ C1) * D)
        b = (1.0 - alpha) * np.sum(M * D) - 4.0 * alpha * np.sum(CTC * D)
        if a > 0:
            tau = min(1.0, max(0.0, -b / (2.0 * a)))
        else:
            tau = 1.0 if a + b < 0 else 0.0
        if tau == 0.0:
            converged = True
            break
        cand = T + tau * D
        cand_value = fgw_objective(cand, M, C0, C1, alpha)
        if cand_value > value:
            # rounding can make a zero-gain step look like a loss
            converged = True
            break
        delta = value - cand_value
        T, value = cand, cand_value
        history.append(value)
        marg.append(TransportPlan(T, p, q).marginal_error())
        if delta <= tol * abs(value):
            converged = True
            break
    return T, value, converged, it, history, marg


def _canonical_order(ag: AttributedGraph) -> list[int]:
    rows = [tuple(r) for r in ag.X.tolist()]
    ranks = {r: i for i, r in enumerate(sorted(set(rows)))}
    labels = [ranks[r] for r in rows]
    if ag.n <= CANONICAL_MAX_NODES:
        return canonical_labeling(ag.g, labels)[0]
    colors = _refine(ag.g, labels, {e: 0 for e in ag.g.edges})
    return sorted(range(ag.n), key=lambda v: (colors[v], v))


def solve_fgw(g0: AttributedGraph, g1: AttributedGraph, cfg: FgwConfig | None = None) -> FgwResult:
    """Fused Gromov-Wasserstein distance under uniform node measures.

    Conditional gradient with an exact transport subproblem and exact line
    search, run from the diagonal coupling between canonically ordered
    vertices (equal sizes only) and from the product coupling; the lower
    objective wins, ties going to the diagonal start. Both graphs are
    relabeled into a canonical order before solving, so the result does not
    depend on the input vertex labels.

    Returns
    -------
    FgwResult
        Unpacks as ``(value, plan)``. ``converged`` is False when
        ``max_iters`` was reached; the last iterate is returned.
    """
    cfg = cfg or FgwConfig()
    if g0.n == 0 or g1.n == 0:
        raise ValueError("FGW needs two non-empty graphs")
    o0, o1 = _canonical_order(g0), _canonical_order(g1)
    X0, X1 = g0.X[o0], g1.X[o1]
    c0 = g0.g.induced(o0)
    c1 = g1.g.induced(o1)
    C0 = intra_cost(structural_embedding(c0, cfg.embed_steps))
    C1 = intra_cost(structural_embedding(c1, cfg.embed_steps))
    M = feature_cost(X0, X1)
    n0, n1 = g0.n, g1.n
    starts = [np.full((n0, n1), 1.0 / (n0 * n1))]
    if n0 == n1:
        # first, so that ties (e.g. a graph against itself) keep the canonical matching
        starts.insert(0, np.eye(n0) / n0)
    best = None
    for T0 in starts:
        run = _frank_wolfe(M, C0, C1, cfg.alpha, T0, cfg.max_iters, cfg.tol)
        if best is None or run[1] < best[1]:
            best = run
    T, value, converged, iters, history, marg = best
    out = np.zeros((n0, n1))
    out[np.ix_(o0, o1)] = T
    plan = TransportPlan(out, np.full(n0, 1.0 / n0), np.full(n1, 1.0 / n1))
    return FgwResult(max(0.0, value), plan, converged, iters, history, marg)


def batch_fgw(
    noise: Sequence[AttributedGraph],
    target: Sequence[AttributedGraph],
    cfg: FgwConfig | None = None,
    threads: int | None = None,
) -> tuple[np.ndarray, list[list[FgwResult]]]:
    """All-pairs FGW matrix ``D[i, j] = FGW(noise[i], target[j])`` and the per-pair results."""
    if len(noise) != len(target):
        raise ValueError(f"batch sizes differ: {len(noise)} vs {len(target)}")
    if not noise:
        raise ValueError("empty batch")
    B = len(noise)
    jobs = [(i, j) for i in range(B) for j in range(B)]
    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            flat = list(pool.map(lambda ij: solve_fgw(noise[ij[0]], target[ij[1]], cfg), jobs))
    else:
        flat = [solve_fgw(noise[i], target[j], cfg) for i, j in jobs]
    results = [flat[i * B : (i + 1) * B] for i in range(B)]
    D = np.array([[r.value for r in row] for row in results])
    return D, results


def hungarian(D: np.ndarray, rtol: float = 1e-12) -> tuple[tuple[int, ...], float]:
    """Minimum-cost assignment ``i -> perm[i]``; ties go to the lexicographically smallest permutation.

    Costs within ``rtol`` (relative) of the optimum count as ties.
    """
    D = np.asarray(D, dtype=np.float64)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValueError(f"cost matrix must be square, got shape {D.shape}")
    if not np.all(np.isfinite(D)):
        raise ValueError("cost matrix must be finite")
    B = D.shape[0]
    rows, cols = linear_sum_assignment(D)
    best = float(D[rows, cols].sum())
    slack = rtol * max(1.0, abs(best))
    perm: list[int] = []
    free_rows = list(range(B))
    free_cols = list(range(B))
    fixed = 0.0
    for i in range(B):
        free_rows.remove(i)
        for j in sorted(free_cols):
            rest = [c for c in free_cols if c != j]
            if free_rows:
                sub = D[np.ix_(free_rows, rest)]
                r, c = linear_sum_assignment(sub)
                tail = float(sub[r, c].sum())
            else:
                tail = 0.0
            if fixed + D[i, j] + tail <= best + slack:
                perm.append(j)
                fixed += float(D[i, j])
                free_cols.remove(j)
                break
        else:  # pragma: no cover - the optimum always admits some extension
            raise RuntimeError("assignment tie-breaking failed")
    return tuple(perm), float(sum(D[i, perm[i]] for i in range(B)))


def align_nodes(plan: TransportPlan | np.ndarray, n: int) -> list[tuple[int, int]]:
    """Greedy max-mass matching on a transport plan, returned sorted by source vertex.

    Repeatedly takes the heaviest entry whose row and column are both unused,
    breaking ties by the smallest ``(i0, i1)``, until ``n`` pairs are chosen.
    """
    T = plan.T if isinstance(plan, TransportPlan) else np.asarray(plan, dtype=np.float64)
    n0, n1 = T.shape
    if n > min(n0, n1) or n < 0:
        raise ValueError(f"node budget {n} exceeds plan shape {T.shape}")
    flat = -T.ravel()
    order = np.lexsort((np.arange(flat.size), flat))
    used0, used1 = set(), set()
    pairs = []
    for idx in order.tolist():
        if len(pairs) == n:
            break
        i, j = divmod(idx, n1)
        if i in used0 or j in used1:
            continue
        used0.add(i)
        used1.add(j)
        pairs.append((i, j))
    return sorted(pairs)
