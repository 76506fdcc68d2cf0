"""Rectified graph flows: interpolants, losses, Euler integration and discrete projection.

States are triples ``(A, X, F)``. ``A`` and ``F`` are symmetric with a zero
diagonal. The velocity field is abstract: the ideal field returns the
constant displacement of a rectified path, and perturbed fields add a
controlled error so integration error bounds can be measured.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .graph import Graph, LabeledGraph

__all__ = [
    "ChemistryTable",
    "ContractingProbeField",
    "GraphState",
    "IdealField",
    "LossParts",
    "LossWeights",
    "PerturbedField",
    "Velocity",
    "deltas",
    "endpoint_prediction",
    "euler_integrate",
    "expected_valence",
    "flow_matching_targets",
    "interpolate",
    "loss_atom",
    "loss_end",
    "loss_val",
    "loss_vel",
    "project_discrete",
    "random_direction",
    "stability_probe",
    "state_from_labeled",
    "total_loss",
]

_SYM_ATOL = 1e-12


def _check_pair_tensor(name: str, M: np.ndarray, n: int) -> None:
    if M.shape[:2] != (n, n):
        raise ValueError(f"{name} must be {n} x {n} in its first two axes, got {M.shape}")
    swapped = M.T if M.ndim == 2 else M.transpose(1, 0, 2)
    if not np.allclose(M, swapped, rtol=0.0, atol=_SYM_ATOL):
        raise ValueError(f"{name} must be symmetric")
    if n and np.abs(M[np.arange(n), np.arange(n)]).max() > _SYM_ATOL:
        raise ValueError(f"{name} must have a zero diagonal")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} must be finite")


class _Triple:
    """Shared arithmetic for states and velocities."""

    def _parts(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        raise NotImplementedError

    def norm(self, lambda_x: float = 1.0, lambda_e: float = 1.0) -> float:
        """Weighted Frobenius norm ``sqrt(|A|^2 + lambda_x |X|^2 + lambda_e |F|^2)``."""
        a, x, f = self._parts()
        return math.sqrt(float(np.sum(a * a) + lambda_x * np.sum(x * x) + lambda_e * np.sum(f * f)))


@dataclass(frozen=True, eq=False)
class GraphState(_Triple):
    A: np.ndarray
    X: np.ndarray
    F: np.ndarray

    def __post_init__(self) -> None:
        A = np.asarray(self.A, dtype=np.float64)
        X = np.asarray(self.X, dtype=np.float64)
        F = np.asarray(self.F, dtype=np.float64)
        if A.ndim != 2:
            raise ValueError("A must be a matrix")
        n = A.shape[0]
        if X.ndim != 2 or X.shape[0] != n:
            raise ValueError(f"X must have {n} rows")
        if F.ndim != 3:
            raise ValueError("F must be an n x n x d_f tensor")
        _check_pair_tensor("A", A, n)
        _check_pair_tensor("F", F, n)
        if not np.all(np.isfinite(X)):
            raise ValueError("X must be finite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "F", F)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def _parts(self):
        return self.A, self.X, self.F

    def shape(self) -> tuple:
        return (self.A.shape, self.X.shape, self.F.shape)

    def __add__(self, v: Velocity) -> GraphState:
        return GraphState(self.A + v.A, self.X + v.X, self.F + v.F)

    def __sub__(self, other: GraphState) -> Velocity:
        _same_shape(self, other)
        return Velocity(self.A - other.A, self.X - other.X, self.F - other.F)


@dataclass(frozen=True, eq=False)
class Velocity(_Triple):
    A: np.ndarray
    X: np.ndarray
    F: np.ndarray

    def __post_init__(self) -> None:
        A = np.asarray(self.A, dtype=np.float64)
        X = np.asarray(self.X, dtype=np.float64)
        F = np.asarray(self.F, dtype=np.float64)
        n = A.shape[0]
        if X.shape[0] != n:
            raise ValueError(f"X must have {n} rows")
        _check_pair_tensor("v_A", A, n)
        _check_pair_tensor("v_F", F, n)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "F", F)

    def _parts(self):
        return self.A, self.X, self.F

    def shape(self) -> tuple:
        return (self.A.shape, self.X.shape, self.F.shape)

    def __add__(self, other: Velocity) -> Velocity:
        _same_shape(self, other)
        return Velocity(self.A + other.A, self.X + other.X, self.F + other.F)

    def __sub__(self, other: Velocity) -> Velocity:
        _same_shape(self, other)
        return Velocity(self.A - other.A, self.X - other.X, self.F - other.F)

    def scale(self, c: float) -> Velocity:
        return Velocity(c * self.A, c * self.X, c * self.F)

    @classmethod
    def zeros_like(cls, s: GraphState | Velocity) -> Velocity:
        return cls(np.zeros_like(s.A), np.zeros_like(s.X), np.zeros_like(s.F))


def _same_shape(a, b) -> None:
    if a.shape() != b.shape():
        raise ValueError(f"shape mismatch: {a.shape()} vs {b.shape()}")


@dataclass(frozen=True)
class LossWeights:
    lambda_x: float = 1.0
    lambda_e: float = 1.0
    beta_end: float = 1.0
    beta_val: float = 1.0
    beta_atom: float = 1.0

    def __post_init__(self) -> None:
        for name in self.__dataclass_fields__:
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    @classmethod
    def parse(cls, text: str) -> LossWeights:
        """Parse ``"lambda_x,lambda_e,beta_end,beta_val,beta_atom"``."""
        vals = [float(x) for x in text.split(",")]
        if len(vals) != 5:
            raise ValueError("expected five comma-separated weights")
        return cls(*vals)


@dataclass(frozen=True)
class ChemistryTable:
    """Bond orders per bond type and valence caps per atom type (default C, N, O, F)."""

    bond_orders: tuple[float, ...] = (1.0, 2.0, 3.0, 1.5)
    max_valence: tuple[float, ...] = (4.0, 3.0, 2.0, 1.0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "bond_orders", tuple(float(b) for b in self.bond_orders))
        object.__setattr__(self, "max_valence", tuple(float(c) for c in self.max_valence))
        if not self.bond_orders or min(self.bond_orders) <= 0:
            raise ValueError("bond orders must be positive")
        if min(self.max_valence, default=0.0) < 0:
            raise ValueError("valence caps must be nonnegative")

    @classmethod
    def from_dict(cls, d: Mapping) -> ChemistryTable:
        return cls(tuple(d["bond_orders"]), tuple(d["max_valence"]))

    def to_dict(self) -> dict:
        return {"bond_orders": list(self.bond_orders), "max_valence": list(self.max_valence)}

    def valences(self, lg: LabeledGraph) -> list[float]:
        val = [0.0] * lg.n
        for (u, v), b in zip(lg.graph.edges, lg.bonds):
            val[u] += self.bond_orders[b]
            val[v] += self.bond_orders[b]
        return val

    def is_valid(self, lg: LabeledGraph) -> bool:
        for a in lg.atoms:
            if not 0 <= a < len(self.max_valence):
                raise ValueError(f"atom type {a} has no valence cap")
        return all(v <= self.max_valence[a] for v, a in zip(self.valences(lg), lg.atoms))


def state_from_labeled(lg: LabeledGraph, n_atom_types: int, n_bond_types: int) -> GraphState:
    """One-hot state: ``A`` is the adjacency, ``X`` atom one-hots, ``F`` bond one-hots on edges."""
    n = lg.n
    X = np.zeros((n, n_atom_types))
    X[np.arange(n), list(lg.atoms)] = 1.0
    F = np.zeros((n, n, n_bond_types))
    for (u, v), b in zip(lg.graph.edges, lg.bonds):
        F[u, v, b] = F[v, u, b] = 1.0
    return GraphState(lg.graph.adjacency(), X, F)


def interpolate(s0: GraphState, s1: GraphState, t: float) -> GraphState:
    """Rectified interpolant ``(1 - t) s0 + t s1``; exact at both ends."""
    _same_shape(s0, s1)
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    if t == 0.0:
        return s0
    if t == 1.0:
        return s1
    return GraphState(
        (1.0 - t) * s0.A + t * s1.A,
        (1.0 - t) * s0.X + t * s1.X,
        (1.0 - t) * s0.F + t * s1.F,
    )


def deltas(s0: GraphState, s1: GraphState) -> Velocity:
    return s1 - s0


def flow_matching_targets(s0: GraphState, s1: GraphState, t: float) -> tuple[GraphState, Velocity]:
    return interpolate(s0, s1, t), deltas(s0, s1)


def endpoint_prediction(s_t: GraphState, v: Velocity, t: float) -> GraphState:
    """Single-step extrapolation ``s_t + (1 - t) v``."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    return s_t + v.scale(1.0 - t)


def loss_vel(v: Velocity, d: Velocity, w: LossWeights | None = None) -> float:
    w = w or LossWeights()
    return (v - d).norm(w.lambda_x, w.lambda_e) ** 2


def loss_end(s_hat: GraphState, s1: GraphState, w: LossWeights | None = None) -> float:
    w = w or LossWeights()
    return (s_hat - s1).norm(w.lambda_x, w.lambda_e) ** 2


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def expected_valence(a_hat: np.ndarray, e_logits: np.ndarray, chem: ChemistryTable) -> np.ndarray:
    """Soft valence ``sum_j sigma((a_ij + a_ji)/2) <softmax(e_ij), b>`` over ``j != i``."""
    a_hat = np.asarray(a_hat, dtype=np.float64)
    e_logits = np.asarray(e_logits, dtype=np.float64)
    n = a_hat.shape[0]
    b = np.asarray(chem.bond_orders)
    if a_hat.shape != (n, n) or e_logits.shape != (n, n, b.size):
        raise ValueError(f"expected logits of shape ({n}, {n}) and ({n}, {n}, {b.size})")
    if n == 0:
        return np.zeros(0)
    weight = _sigmoid(0.5 * (a_hat + a_hat.T))
    np.fill_diagonal(weight, 0.0)
    order = _softmax(e_logits) @ b
    return np.sum(weight * order, axis=1)


def loss_val(a_hat: np.ndarray, e_logits: np.ndarray, atom_types: Sequence[int], chem: ChemistryTable) -> float:
    """Mean hinge ``max(0, valence_i - cap_i)`` over nodes."""
    val = expected_valence(a_hat, e_logits, chem)
    if len(atom_types) != val.size:
        raise ValueError("need one atom type per node")
    if val.size == 0:
        return 0.0
    caps = []
    for a in atom_types:
        if not 0 <= int(a) < len(chem.max_valence):
            raise ValueError(f"atom type {a} has no valence cap")
        caps.append(chem.max_valence[int(a)])
    return float(np.mean(np.maximum(0.0, val - np.asarray(caps))))


def loss_atom(x_hat: np.ndarray, x1: np.ndarray) -> float:
    """Squared distance between the mean predicted and mean target atom-type distributions.

    Column means use exactly rounded sums, so reordering rows cannot change the result.
    """
    x_hat = np.asarray(x_hat, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    if x_hat.shape != x1.shape or x_hat.ndim != 2:
        raise ValueError(f"shape mismatch: {x_hat.shape} vs {x1.shape}")
    n, d = x_hat.shape
    if n == 0:
        return 0.0
    probs = _softmax(x_hat)
    diff = [(math.fsum(probs[:, k]) - math.fsum(x1[:, k])) / n for k in range(d)]
    return math.fsum(x * x for x in diff)


@dataclass(frozen=True)
class LossParts:
    vel: float = 0.0
    end: float = 0.0
    val: float = 0.0
    atom: float = 0.0


def total_loss(parts: LossParts, w: LossWeights | None = None) -> float:
    w = w or LossWeights()
    for name in ("vel", "end", "val", "atom"):
        if getattr(parts, name) < 0:
            raise ValueError(f"loss part {name} must be nonnegative")
    return parts.vel + w.beta_end * parts.end + w.beta_val * parts.val + w.beta_atom * parts.atom


VelocityField = Callable[[GraphState, float], Velocity]


@dataclass(frozen=True, eq=False)
class IdealField:
    """Constant field equal to the path displacement."""

    delta: Velocity

    def __call__(self, s: GraphState, t: float) -> Velocity:
        return self.delta


def random_direction(like: GraphState | Velocity, rng: np.random.Generator) -> Velocity:
    """Symmetric, zero-diagonal direction with unit joint Frobenius norm."""
    n = like.A.shape[0]
    A = rng.standard_normal((n, n))
    A = np.triu(A, 1)
    A = A + A.T
    F = rng.standard_normal(like.F.shape)
    F = np.triu(np.moveaxis(F, 2, 0), 1)
    F = np.moveaxis(F + F.transpose(0, 2, 1), 0, 2)
    X = rng.standard_normal(like.X.shape)
    v = Velocity(A, X, F)
    norm = v.norm()
    if norm == 0.0:
        raise ValueError("cannot draw a direction for an empty state")
    return v.scale(1.0 / norm)


@dataclass(frozen=True, eq=False)
class PerturbedField:
    """``base + eps * U`` with a fixed unit-norm direction ``U``."""

    base: VelocityField
    eps: float
    direction: Velocity

    def __post_init__(self) -> None:
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        if abs(self.direction.norm() - 1.0) > 1e-12:
            raise ValueError("perturbation direction must have unit Frobenius norm")

    def __call__(self, s: GraphState, t: float) -> Velocity:
        return self.base(s, t) + self.direction.scale(self.eps)


@dataclass(frozen=True, eq=False)
class ContractingProbeField:
    """``Delta + eps U - L (s - s*_t)`` where ``s*_t`` is the exact rectified path.

    The field is ``L``-Lipschitz in the state. With step ``h = 1/K`` and
    ``h L <= 1`` the Euler endpoint error is exactly
    ``eps (1 - (1 - L/K)^K) / L`` (``eps`` when ``L = 0``).
    """

    s0: GraphState
    delta: Velocity
    eps: float
    direction: Velocity
    lipschitz: float = 0.5

    def __call__(self, s: GraphState, t: float) -> Velocity:
        v = self.delta + self.direction.scale(self.eps)
        if self.lipschitz == 0.0:
            return v
        target = self.s0 + self.delta.scale(t)
        return v - (s - target).scale(self.lipschitz)


def _activate(s: GraphState) -> GraphState:
    A = np.clip(s.A, 0.0, 1.0)
    A = 0.5 * (A + A.T)
    F = 0.5 * (s.F + s.F.transpose(1, 0, 2))
    return GraphState(A, s.X, F)


def euler_integrate(field: VelocityField, s0: GraphState, K: int, activate: bool = True) -> GraphState:
    """``K`` explicit Euler steps at ``t_k = k/K``.

    With ``activate`` the final ``A`` is clamped to [0, 1] and ``A`` and ``F``
    are re-symmetrized.
    """
    if K < 1:
        raise ValueError("need at least one Euler step")
    h = 1.0 / K
    s = s0
    for k in range(K):
        s = s + field(s, k / K).scale(h)
    return _activate(s) if activate else s


def stability_probe(
    s0: GraphState,
    s1: GraphState,
    eps_grid: Sequence[float],
    k_grid: Sequence[int],
    lipschitz: float = 0.5,
    direction: Velocity | None = None,
    rng: np.random.Generator | None = None,
) -> list[dict]:
    """Measured pre-activation endpoint error against ``C (eps + 1/K)`` over a grid.

    ``C = (e^L - 1)/L + C2`` where ``C2`` is the largest ``error * K`` seen
    on the ``eps = 0`` runs (``C2 = 0`` when every such run is exact).
    """
    delta = deltas(s0, s1)
    if direction is None:
        direction = random_direction(s0, rng if rng is not None else np.random.default_rng(0))

    def run(eps: float, K: int) -> float:
        field = ContractingProbeField(s0, delta, eps, direction, lipschitz)
        return (euler_integrate(field, s0, K, activate=False) - s1).norm()

    c2 = max((run(0.0, K) * K for K in k_grid), default=0.0)
    c = (math.expm1(lipschitz) / lipschitz if lipschitz > 0 else 1.0) + c2
    rows = []
    for eps in eps_grid:
        for K in k_grid:
            err = run(eps, K)
            rows.append({"eps": eps, "K": K, "error": err, "bound": c * (eps + 1.0 / K), "C": c})
    return rows


def project_discrete(s: GraphState, chem: ChemistryTable | None = None, threshold: float = 0.5) -> LabeledGraph:
    """Threshold ``A``, take argmax atom and bond types, then prune valence violations.

    While some node exceeds its cap, the lowest-confidence edge touching a
    violating node is removed (ties by smallest ``(i, j)``). Without a
    chemistry table no pruning happens.
    """
    n = s.n
    atoms = s.X.argmax(axis=1).tolist() if s.X.shape[1] else [0] * n
    iu, ju = np.triu_indices(n, 1)
    keep = s.A[iu, ju] >= threshold
    edges = list(zip(iu[keep].tolist(), ju[keep].tolist()))
    bond = {}
    for u, v in edges:
        bond[(u, v)] = int(s.F[u, v].argmax()) if s.F.shape[2] else 0
    if chem is not None:
        for a in atoms:
            if a >= len(chem.max_valence):
                raise ValueError(f"atom type {a} has no valence cap")
        for b in bond.values():
            if b >= len(chem.bond_orders):
                raise ValueError(f"bond type {b} has no bond order")
        val = [0.0] * n
        for (u, v), b in bond.items():
            val[u] += chem.bond_orders[b]
            val[v] += chem.bond_orders[b]
        while True:
            bad = {i for i in range(n) if val[i] > chem.max_valence[atoms[i]]}
            if not bad:
                break
            u, v = min((e for e in bond if e[0] in bad or e[1] in bad), key=lambda e: (s.A[e], e))
            b = bond.pop((u, v))
            val[u] -= chem.bond_orders[b]
            val[v] -= chem.bond_orders[b]
        edges = sorted(bond)
    g = Graph(n, tuple(edges))
    return LabeledGraph(g, tuple(atoms), tuple(bond[e] for e in g.edges))
