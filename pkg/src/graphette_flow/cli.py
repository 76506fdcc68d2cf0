"""Command-line entry point: ``graphette-flow {sample,couple,flow run,eval,verify}``.

Outputs are JSON or JSON-lines with sorted keys, so a fixed ``--seed``
gives byte-identical files. Exit codes: 0 success, 1 failed verification,
2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Sequence

from .coupling import FgwConfig
from .flow import ChemistryTable, LossWeights
from .graph import LabeledGraph, canonical_form, graph_from_doc, graph_to_doc, is_labeled_doc, read_corpus
from .graph import UnsupportedSizeError, write_corpus
from .metrics import describe, ratio, vun
from .pipeline import (
    STAGE_FLOW,
    STAGE_LABEL,
    STAGE_NOISE,
    STAGE_SAMPLE,
    CoupledPair,
    LabelSpace,
    categorical_labels,
    couple,
    item_rng,
    run_flow,
    valence_labels,
)
from .priors import PRIOR_NAMES, graphette_from_config, sample_graphette, named_prior
from .verification import SUITES, run_suites


class UsageError(Exception):
    pass


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    return cfg


def _chemistry(cfg: dict) -> ChemistryTable:
    return ChemistryTable.from_dict(cfg["chemistry"]) if "chemistry" in cfg else ChemistryTable()


def _dump(obj, out: str | None) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _clean(x: float) -> float | None:
    return None if isinstance(x, float) and math.isnan(x) else x


def _read(path: str) -> list[dict]:
    try:
        return read_corpus(path)
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        raise UsageError(f"cannot read corpus {path}: {exc}") from exc


def cmd_sample(args, cfg: dict) -> int:
    if args.prior is not None:
        gw = named_prior(args.prior)
    elif "graphon" in cfg or "prior" in cfg:
        gw = graphette_from_config(cfg)
    elif "graphette" in cfg:
        gw = graphette_from_config(cfg["graphette"])
    else:
        raise UsageError("need --prior NAME or a --config with a graphette prior")
    chem = _chemistry(cfg)
    docs = []
    for i in range(args.n_graphs):
        g = sample_graphette(gw, args.n_nodes, item_rng(args.seed, STAGE_SAMPLE, i))
        if args.labels == "valence":
            docs.append(graph_to_doc(valence_labels(g, chem, item_rng(args.seed, STAGE_LABEL, i))))
        else:
            docs.append(graph_to_doc(g))
    _write_corpus(args.out, docs)
    return 0


def _write_corpus(out: str | None, docs: list[dict]) -> None:
    if out is None or out == "-":
        for d in docs:
            sys.stdout.write(json.dumps(d, sort_keys=True, separators=(",", ":")) + "\n")
    else:
        write_corpus(out, docs)


def _fgw_config(args, cfg: dict) -> FgwConfig:
    base = dict(cfg.get("fgw", {}))
    for key in ("alpha", "max_iters", "tol", "embed_steps"):
        val = getattr(args, key)
        if val is not None:
            base[key] = val
    return FgwConfig(**base)


def cmd_couple(args, cfg: dict) -> int:
    noise_docs, target_docs = _read(args.noise), _read(args.target)
    if len(noise_docs) != len(target_docs):
        raise UsageError(f"corpus sizes differ: {len(noise_docs)} noise vs {len(target_docs)} target")
    labeled = any(is_labeled_doc(d) for d in target_docs)
    chem = _chemistry(cfg) if labeled else None
    space = LabelSpace.for_chemistry(chem)
    atom_p = cfg.get("noise_atoms", [1.0 / space.n_atoms] * space.n_atoms)
    bond_p = cfg.get("noise_bonds", [1.0 / space.n_bonds] * space.n_bonds)
    noise, target = [], [graph_from_doc(d) for d in target_docs]
    for i, d in enumerate(noise_docs):
        lg = graph_from_doc(d)
        if labeled and not is_labeled_doc(d):
            # noise labels come from the fixed categorical prior
            lg = categorical_labels(lg.graph, atom_p, bond_p, item_rng(args.seed, STAGE_NOISE, i))
        noise.append(lg)
    c = couple(noise, target, space, _fgw_config(args, cfg), threads=args.threads)
    pairs = [
        {
            "noise_index": p.noise_index,
            "target_index": p.target_index,
            "noise": graph_to_doc(p.noise),
            "target": graph_to_doc(p.target),
            "correspondence": [list(x) for x in p.correspondence],
            "fgw": p.fgw,
        }
        for p in c.pairs
    ]
    out = {
        "labeled": labeled,
        "chemistry": chem.to_dict() if chem else None,
        "D": c.D.tolist(),
        "assignment": list(c.assignment),
        "cost": c.cost,
        "pairs": pairs,
    }
    _dump(out, args.out)
    return 0


def cmd_flow_run(args, cfg: dict) -> int:
    try:
        with open(args.coupling) as fh:
            doc = json.load(fh)
        chem = ChemistryTable.from_dict(doc["chemistry"]) if doc.get("chemistry") else None
        labeled = bool(doc.get("labeled"))
        raw_pairs = doc["pairs"]
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise UsageError(f"cannot read coupling {args.coupling}: {exc}") from exc
    weights = LossWeights.parse(args.weights) if args.weights else LossWeights(**cfg.get("weights", {}))
    space = LabelSpace.for_chemistry(chem)
    docs, rows = [], []
    for i, rp in enumerate(raw_pairs):
        pair = CoupledPair(
            rp["noise_index"],
            rp["target_index"],
            graph_from_doc(rp["noise"]),
            graph_from_doc(rp["target"]),
            [tuple(x) for x in rp["correspondence"]],
            rp["fgw"],
        )
        s0, s1 = pair.states(space)
        res = run_flow(s0, s1, args.steps, args.eps, item_rng(args.seed, STAGE_FLOW, i), chem, args.threshold, weights)
        target = pair.target.induced([j for _, j in pair.correspondence])
        try:
            same = _certificate(res.graph, labeled) == _certificate(target, labeled)
        except UnsupportedSizeError:
            same = None
        docs.append(graph_to_doc(res.graph if labeled else res.graph.graph))
        rows.append(
            {
                "pair": i,
                "endpoint_error": res.endpoint_error,
                "loss_vel": res.losses.vel,
                "loss_end": res.losses.end,
                "loss_val": res.losses.val,
                "loss_atom": res.losses.atom,
                "loss_total": res.total,
                "isomorphic_to_target": same,
            }
        )
    _write_corpus(args.out, docs)
    report = {
        "steps": args.steps,
        "eps": args.eps,
        "threshold": args.threshold,
        "pairs": rows,
        "isomorphic_fraction": sum(r["isomorphic_to_target"] is True for r in rows) / max(1, len(rows)),
    }
    _dump(report, args.report)
    return 0


def _certificate(lg: LabeledGraph, labeled: bool) -> bytes:
    if labeled:
        return canonical_form(lg.graph, lg.atoms, lg.bonds)
    return canonical_form(lg.graph)


def cmd_eval(args, cfg: dict) -> int:
    gen_docs, train_docs, test_docs = _read(args.gen), _read(args.train), _read(args.test)
    labeled = any(is_labeled_doc(d) for d in gen_docs + train_docs)
    gen, train, test = ([graph_from_doc(d) for d in docs] for docs in (gen_docs, train_docs, test_docs))
    out = {}
    for key, kind in (("deg_ratio", "degree_hist"), ("clus_ratio", "clustering_hist"), ("orbit_ratio", "orbit_counts")):
        d = [describe([lg.graph for lg in s], kind) for s in (gen, train, test)]
        out[key] = _clean(ratio(*d))
    chem = _chemistry(cfg) if labeled else None
    samples = gen if labeled else [lg.graph for lg in gen]
    ref = train if labeled else [lg.graph for lg in train]
    out["valid"], out["unique"], out["novel"] = vun(samples, ref, chem)
    _dump(out, args.out)
    return 0


def cmd_verify(args, cfg: dict) -> int:
    names = SUITES if args.suite == "all" else (args.suite,)
    report = run_suites(names, args.seed)
    _dump(report, args.out)
    return 0 if report["passed"] else 1


def build_parser() -> argparse.ArgumentParser:
    def global_flags(defaults: bool) -> argparse.ArgumentParser:
        # subcommands repeat the flags without defaults so they do not mask earlier values
        p = argparse.ArgumentParser(add_help=False)
        d = (lambda v: v) if defaults else (lambda v: argparse.SUPPRESS)
        p.add_argument("--seed", type=int, default=d(0), help="master seed (default 0)")
        p.add_argument("--config", default=d(None), help="JSON run configuration")
        p.add_argument("--out", default=d(None), help="output path (default stdout)")
        p.add_argument("--threads", type=int, default=d(1), help="worker threads for coupling")
        return p

    common = global_flags(False)
    parser = argparse.ArgumentParser(
        prog="graphette-flow", parents=[global_flags(True)], description=__doc__.splitlines()[0]
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", parents=[common], help="sample a corpus from a graphette prior")
    p.add_argument("--prior", choices=PRIOR_NAMES, help="benchmark prior (overrides --config)")
    p.add_argument("--n-graphs", type=int, required=True)
    p.add_argument("--n-nodes", type=int, required=True)
    p.add_argument("--labels", choices=("none", "valence"), default="none",
                   help="attach valence-feasible atom labels and single bonds")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("couple", parents=[common], help="FGW-couple a noise corpus with a target corpus")
    p.add_argument("--noise", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--alpha", type=float)
    p.add_argument("--max-iters", type=int, dest="max_iters")
    p.add_argument("--tol", type=float)
    p.add_argument("--embed-steps", type=int, dest="embed_steps")
    p.set_defaults(func=cmd_couple)

    p = sub.add_parser("flow", help="integrate coupled pairs")
    flow_sub = p.add_subparsers(dest="flow_command", required=True)
    p = flow_sub.add_parser("run", parents=[common], help="Euler-integrate and project every coupled pair")
    p.add_argument("--coupling", required=True)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--eps", type=float, default=0.0, help="perturbation size (0 = ideal field)")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--weights", help="lambda_x,lambda_e,beta_end,beta_val,beta_atom")
    p.add_argument("--report", help="path for the JSON run report (default stdout)")
    p.set_defaults(func=cmd_flow_run)

    p = sub.add_parser("eval", parents=[common], help="MMD ratios and validity/uniqueness/novelty")
    p.add_argument("--gen", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("verify", parents=[common], help="run property suites")
    p.add_argument("suite", choices=SUITES + ("all",))
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "steps", 1) < 1:
            raise UsageError("--steps must be at least 1")
        cfg = _load_config(args.config)
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"graphette-flow: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, TypeError, KeyError) as exc:
        print(f"graphette-flow: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
