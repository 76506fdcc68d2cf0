"""Executable property suites behind ``graphette-flow verify``.

Each suite returns a JSON-ready dict with one entry per check and an
overall ``passed`` flag. Sizes and tolerances are the acceptance settings.
"""

from __future__ import annotations

import time

import numpy as np

from .coupling import AttributedGraph, FgwConfig, batch_fgw, feature_cost, fgw_objective, hungarian, intra_cost
from .coupling import solve_fgw, structural_embedding
from .flow import ChemistryTable, IdealField, deltas, endpoint_prediction, euler_integrate, interpolate
from .flow import stability_probe
from .homomorphism import PATTERNS, hom_count, predict_edit_homs, verify_triangle_covered_preservation
from .pipeline import STAGE_VERIFY, LabelSpace, categorical_labels, couple, item_rng, valence_labels
from .priors import Graphette, RingAddition, SparsitySchedule, StarAddition, constant_graphon
from .priors import sample_graphette_trace, sample_graphon

SUITES = ("hom", "fgw", "flow")

TRIANGLE_COVERED = {"triangle": PATTERNS["triangle"], "k4": PATTERNS["k4"], "bowtie": PATTERNS["bowtie"]}


def _edited_sample(rng: np.random.Generator, base_max: int, budget: int, kind: str):
    n = int(rng.integers(3, base_max + 1))
    w = constant_graphon(float(rng.uniform(0.5, 0.95)))
    if kind == "star":
        edit = StarAddition(0.05, 0.2)
    else:
        edit = RingAddition(0.5, 4 if kind == "ring4" else 5)
    return sample_graphette_trace(Graphette(w, SparsitySchedule.constant(1.0), (edit,)), n, rng, budget=budget)


def suite_hom(seed: int = 0, n_preserve: int = 200, n_predict: int = 100) -> dict:
    start = time.perf_counter()
    kinds = ("star", "ring4", "ring5")
    mismatches, edited = [], 0
    for i in range(n_preserve):
        kind = kinds[i % 3]
        s = _edited_sample(item_rng(seed, STAGE_VERIFY, i), 6, 9, kind)
        edited += s.graph.n > s.base.n
        report = verify_triangle_covered_preservation(s.base, s.graph, TRIANGLE_COVERED)
        if not report.ok:
            mismatches.append({"sample": i, "checks": [c.to_dict() for c in report.checks]})
    preserve_time = time.perf_counter() - start

    bad_predict = []
    vertex, edge = PATTERNS["vertex"], PATTERNS["edge"]
    for i in range(n_predict):
        kind = ("star", "ring4", "ring5")[i % 3]
        s = _edited_sample(item_rng(seed, STAGE_VERIFY, 10_000 + i), 5, 10, kind)
        before, after = s.base, s.graph
        m = after.n - before.n
        k = 0 if kind == "star" else m // (4 if kind == "ring4" else 5)
        hv, he = hom_count(vertex, before), hom_count(edge, before)
        pred = predict_edit_homs("star" if kind == "star" else "ring", hv, he, m, k)
        got = (hom_count(vertex, after), hom_count(edge, after))
        density_gap = abs(got[1] / after.n**2 - pred[1] / (before.n + m) ** 2)
        if got != pred or density_gap > 1e-12:
            bad_predict.append({"sample": i, "kind": kind, "predicted": pred, "measured": got})

    checks = {
        "triangle_covered_preservation": {
            "samples": n_preserve,
            "edited": int(edited),
            "failures": mismatches,
            "seconds": round(preserve_time, 3),
            "passed": not mismatches and preserve_time < 60.0,
        },
        "edit_hom_prediction": {"samples": n_predict, "failures": bad_predict, "passed": not bad_predict},
    }
    return {"suite": "hom", "checks": checks, "passed": all(c["passed"] for c in checks.values())}


def random_attributed(rng: np.random.Generator, n_max: int = 8, n_features: int = 3) -> AttributedGraph:
    n = int(rng.integers(1, n_max + 1))
    g = sample_graphon(constant_graphon(float(rng.uniform(0.2, 0.8))), n, rng)
    return AttributedGraph(g, np.eye(n_features)[rng.integers(n_features, size=n)])


def planted_corpus(rng: np.random.Generator, size: int, cfg: FgwConfig, gap: float = 1e-6) -> list[AttributedGraph]:
    """Random attributed graphs at pairwise FGW distance above ``gap``.

    FGW only separates graphs up to its own zero set (for example an edgeless
    pair and a perfect matching with equal features are at distance 0), so
    matching can only recover a planted permutation among separated graphs.
    """
    corpus: list[AttributedGraph] = []
    while len(corpus) < size:
        g = random_attributed(rng)
        if all(solve_fgw(g, h, cfg).value > gap for h in corpus):
            corpus.append(g)
    return corpus


def suite_fgw(seed: int = 0, n_graphs: int = 50, n_planted: int = 100, cfg: FgwConfig | None = None) -> dict:
    cfg = cfg or FgwConfig()
    self_worst, inv_worst, obj_worst = 0.0, 0.0, 0.0
    for i in range(n_graphs):
        rng = item_rng(seed, STAGE_VERIFY, 20_000 + i)
        g0, g1 = random_attributed(rng), random_attributed(rng)
        self_worst = max(self_worst, solve_fgw(g0, g0, cfg).value)
        pi, tau = rng.permutation(g0.n), rng.permutation(g1.n)
        a = solve_fgw(g0, g1, cfg).value
        b = solve_fgw(g0.permute(pi), g1.permute(tau), cfg).value
        inv_worst = max(inv_worst, abs(a - b))

        C0 = intra_cost(structural_embedding(g0, cfg.embed_steps))
        C1 = intra_cost(structural_embedding(g1, cfg.embed_steps))
        M = feature_cost(g0.X, g1.X)
        T = rng.random((g0.n, g1.n))
        T /= T.sum()
        P0, P1 = np.eye(g0.n)[np.argsort(pi)], np.eye(g1.n)[np.argsort(tau)]
        lhs = fgw_objective(T, M, C0, C1, cfg.alpha)
        rhs = fgw_objective(P0.T @ T @ P1, P0.T @ M @ P1, P0.T @ C0 @ P0, P1.T @ C1 @ P1, cfg.alpha)
        obj_worst = max(obj_worst, abs(lhs - rhs))

    recovered = 0
    for i in range(n_planted):
        rng = item_rng(seed, STAGE_VERIFY, 30_000 + i)
        B = int(rng.integers(2, 9))
        corpus = planted_corpus(rng, B, cfg)
        sigma = rng.permutation(B)
        target = [None] * B
        for k in range(B):
            target[sigma[k]] = corpus[k].permute(rng.permutation(corpus[k].n))
        D, _ = batch_fgw(corpus, target, cfg)
        perm, _ = hungarian(D)
        recovered += tuple(perm) == tuple(sigma.tolist())

    checks = {
        "self_distance": {"worst": self_worst, "tol": 1e-9, "passed": self_worst <= 1e-9},
        "solver_invariance": {"worst": inv_worst, "tol": 1e-6, "passed": inv_worst <= 1e-6},
        "objective_invariance": {"worst": obj_worst, "tol": 1e-12, "passed": obj_worst <= 1e-12},
        "planted_recovery": {"trials": n_planted, "recovered": recovered, "passed": recovered == n_planted},
    }
    return {"suite": "fgw", "checks": checks, "passed": all(c["passed"] for c in checks.values())}


def coupled_state_pairs(seed: int, count: int, chem: ChemistryTable | None = None):
    """Seeded (noise, target) state pairs coupled by FGW, noise at least as large as the target."""
    chem = chem or ChemistryTable()
    space = LabelSpace.for_chemistry(chem)
    uniform_atoms = np.full(space.n_atoms, 1.0 / space.n_atoms)
    uniform_bonds = np.full(space.n_bonds, 1.0 / space.n_bonds)
    pairs = []
    for i in range(count):
        rng = item_rng(seed, STAGE_VERIFY, 40_000 + i)
        n1 = int(rng.integers(2, 8))
        n0 = int(rng.integers(n1, 9))
        target = valence_labels(sample_graphon(constant_graphon(0.35), n1, rng), chem, rng)
        noise = categorical_labels(sample_graphon(constant_graphon(0.5), n0, rng), uniform_atoms, uniform_bonds, rng)
        c = couple([noise], [target], space)
        pairs.append(c.pairs[0].states(space))
    return pairs


def suite_flow(seed: int = 0, n_pairs: int = 100) -> dict:
    ks = (1, 2, 7, 50)
    pairs = coupled_state_pairs(seed, n_pairs)
    endpoint_worst, identity_worst = 0.0, 0.0
    for s0, s1 in pairs:
        delta = deltas(s0, s1)
        field = IdealField(delta)
        for K in ks:
            endpoint_worst = max(endpoint_worst, (euler_integrate(field, s0, K, activate=False) - s1).norm())
        for t in (0.0, 0.25, 0.5, 0.9, 1.0):
            pred = endpoint_prediction(interpolate(s0, s1, t), delta, t)
            identity_worst = max(identity_worst, (pred - s1).norm())

    s0, s1 = pairs[0]
    eps_grid, k_grid = (0.0, 0.01, 0.05, 0.1), (1, 5, 25, 125)
    rows = stability_probe(s0, s1, eps_grid, k_grid, lipschitz=0.5, rng=item_rng(seed, STAGE_VERIFY, 50_000))
    table = {(r["eps"], r["K"]): r["error"] for r in rows}
    within = all(r["error"] <= r["bound"] for r in rows)
    # rounding noise at eps = 0 is compared with the same 1e-12 slack as the endpoint check
    monotone = all(table[(e, a)] + 1e-12 >= table[(e, b)] for e in eps_grid for a, b in zip(k_grid, k_grid[1:]))
    linear = all(
        abs(table[(e, K)] - (e / 0.1) * table[(0.1, K)]) <= 1e-9 * max(1.0, table[(0.1, K)])
        for e in eps_grid
        for K in k_grid
    )
    checks = {
        "endpoint_consistency": {"pairs": n_pairs, "K": list(ks), "worst": endpoint_worst, "passed": endpoint_worst <= 1e-12},
        "endpoint_identity": {"worst": identity_worst, "passed": identity_worst <= 1e-12},
        "stability_bound": {"table": rows, "passed": within},
        "stability_monotone_in_K": {"passed": monotone},
        "stability_linear_in_eps": {"passed": linear},
    }
    return {"suite": "flow", "checks": checks, "passed": all(c["passed"] for c in checks.values())}


def run_suites(names, seed: int = 0) -> dict:
    fns = {"hom": suite_hom, "fgw": suite_fgw, "flow": suite_flow}
    reports = [fns[name](seed) for name in names]
    return {"seed": seed, "suites": reports, "passed": all(r["passed"] for r in reports)}

