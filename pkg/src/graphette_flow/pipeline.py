"""Glue between sampling, coupling and flow used by the CLI and the verification suites.

Every random choice draws from a per-item generator derived from one seed
as ``SeedSequence(seed, spawn_key=(stage, item))``, so results do not depend
on execution order or thread count.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .coupling import AttributedGraph, FgwConfig, align_nodes, batch_fgw, hungarian
from .flow import (
    ChemistryTable,
    GraphState,
    IdealField,
    LossParts,
    LossWeights,
    PerturbedField,
    deltas,
    endpoint_prediction,
    euler_integrate,
    interpolate,
    loss_atom,
    loss_end,
    loss_val,
    loss_vel,
    project_discrete,
    random_direction,
    state_from_labeled,
    total_loss,
)
from .graph import Graph, LabeledGraph

STAGE_SAMPLE = 0
STAGE_LABEL = 1
STAGE_NOISE = 2
STAGE_FLOW = 3
STAGE_VERIFY = 4


def item_rng(seed: int, stage: int, item: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stage, item)))


def valence_labels(g: Graph, chem: ChemistryTable, rng: np.random.Generator) -> LabeledGraph:
    """Single bonds everywhere; each atom drawn uniformly from the types whose cap fits its degree."""
    deg = g.degrees()
    caps = np.asarray(chem.max_valence)
    single = chem.bond_orders[0]
    atoms = []
    for d in deg.tolist():
        ok = np.flatnonzero(caps >= d * single)
        atoms.append(int(rng.choice(ok)) if ok.size else int(caps.argmax()))
    return LabeledGraph(g, tuple(atoms), (0,) * g.num_edges)


def categorical_labels(
    g: Graph,
    atom_probs: Sequence[float],
    bond_probs: Sequence[float],
    rng: np.random.Generator,
) -> LabeledGraph:
    """Independent categorical atom and bond labels."""
    atoms = rng.choice(len(atom_probs), size=g.n, p=np.asarray(atom_probs, dtype=np.float64))
    bonds = rng.choice(len(bond_probs), size=g.num_edges, p=np.asarray(bond_probs, dtype=np.float64))
    return LabeledGraph(g, tuple(atoms.tolist()), tuple(bonds.tolist()))


@dataclass(frozen=True)
class LabelSpace:
    n_atoms: int = 1
    n_bonds: int = 1

    @classmethod
    def for_chemistry(cls, chem: ChemistryTable | None) -> LabelSpace:
        if chem is None:
            return cls()
        return cls(len(chem.max_valence), len(chem.bond_orders))


@dataclass(eq=False)
class CoupledPair:
    noise_index: int
    target_index: int
    noise: LabeledGraph
    target: LabeledGraph
    # (noise vertex, target vertex), ordered by target vertex
    correspondence: list[tuple[int, int]]
    fgw: float

    def states(self, space: LabelSpace) -> tuple[GraphState, GraphState]:
        """Endpoint states on the common node budget, in target-vertex order."""
        src = [i0 for i0, _ in self.correspondence]
        dst = [i1 for _, i1 in self.correspondence]
        s0 = state_from_labeled(self.noise.induced(src), space.n_atoms, space.n_bonds)
        s1 = state_from_labeled(self.target.induced(dst), space.n_atoms, space.n_bonds)
        return s0, s1


@dataclass(eq=False)
class Coupling:
    D: np.ndarray
    assignment: tuple[int, ...]
    cost: float
    pairs: list[CoupledPair]


def couple(
    noise: Sequence[LabeledGraph],
    target: Sequence[LabeledGraph],
    space: LabelSpace,
    cfg: FgwConfig | None = None,
    threads: int | None = None,
) -> Coupling:
    """All-pairs FGW, Hungarian assignment, then node correspondences per matched pair."""
    if len(noise) != len(target):
        raise ValueError(f"corpus sizes differ: {len(noise)} noise vs {len(target)} target graphs")
    ag0 = [AttributedGraph.from_labeled(g, space.n_atoms, space.n_bonds) for g in noise]
    ag1 = [AttributedGraph.from_labeled(g, space.n_atoms, space.n_bonds) for g in target]
    D, results = batch_fgw(ag0, ag1, cfg, threads=threads)
    perm, cost = hungarian(D)
    pairs = []
    for i, j in enumerate(perm):
        budget = min(noise[i].n, target[j].n)
        corr = sorted(align_nodes(results[i][j].plan, budget), key=lambda p: p[1])
        pairs.append(CoupledPair(i, j, noise[i], target[j], corr, float(D[i, j])))
    return Coupling(D, perm, cost, pairs)


@dataclass(eq=False)
class FlowOutput:
    graph: LabeledGraph
    endpoint_error: float
    losses: LossParts
    total: float


def run_flow(
    s0: GraphState,
    s1: GraphState,
    steps: int,
    eps: float,
    rng: np.random.Generator,
    chem: ChemistryTable | None,
    threshold: float = 0.5,
    weights: LossWeights | None = None,
) -> FlowOutput:
    """Integrate the ideal (``eps = 0``) or perturbed field from ``s0`` and project the endpoint.

    Loss parts are evaluated at the path midpoint with the field's velocity.
    """
    weights = weights or LossWeights()
    delta = deltas(s0, s1)
    field = IdealField(delta)
    if eps > 0:
        field = PerturbedField(field, eps, random_direction(s0, rng))
    raw = euler_integrate(field, s0, steps, activate=False)
    out = euler_integrate(field, s0, steps, activate=True)
    graph = project_discrete(out, chem, threshold)

    t = 0.5
    s_t = interpolate(s0, s1, t)
    v = field(s_t, t)
    s_hat = endpoint_prediction(s_t, v, t)
    val = 0.0
    if chem is not None and s_hat.n:
        val = loss_val(s_hat.A, s_hat.F, s_hat.X.argmax(axis=1).tolist(), chem)
    parts = LossParts(
        vel=loss_vel(v, delta, weights),
        end=loss_end(s_hat, s1, weights),
        val=val,
        atom=loss_atom(s_hat.X, s1.X) if s_hat.n else 0.0,
    )
    return FlowOutput(graph, (raw - s1).norm(), parts, total_loss(parts, weights))
