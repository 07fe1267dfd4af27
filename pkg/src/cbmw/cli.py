"""Command line entry points.

Every subcommand reads/writes a workspace directory (--workspace or
CBMW_WORKSPACE, default ./workspace), prints a JSON summary to stdout, and on
failure prints {"error": ...} and exits nonzero. Commands are deterministic:
re-running with identical inputs rewrites identical artifact bytes.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .cbm import TrainConfig, predict_split, train
from .cohort_io import save_cohort, save_extracted
from .generate import GeneratorConfig, generate_cohort
from .intervene import run_intervention, top_concepts_by_correction
from .metrics import (
    concept_mae,
    concept_task_leakage,
    evaluate_predictions,
    inter_concept_leakage,
)
from .preprocess import preprocess
from .schema import schema_hash, validate_cohort
from .textconcepts import ChunkConfig, HttpExtractor, MockExtractor, extract_all
from .workspace import Workspace


class CliError(Exception):
    pass


def _print(doc: dict) -> None:
    print(json.dumps(doc, indent=2, sort_keys=True))


def _load_valid_cohort(ws: Workspace, name: str, with_extracted: bool = True):
    cohort = ws.load_cohort(name, with_extracted=with_extracted)
    violations = validate_cohort(cohort)
    if violations:
        lines = [f"{v.record_id}/{v.field}: {v.message}" for v in violations[:10]]
        raise CliError(f"cohort {name} failed validation: " + "; ".join(lines))
    return cohort


def cmd_gen_cohort(args) -> dict:
    ws = Workspace.from_env(args.workspace).ensure()
    weights = None
    if args.label_weights:
        with open(args.label_weights, "r", encoding="utf-8") as fh:
            weights = json.load(fh)
    cfg = GeneratorConfig(
        n_patients=args.n, seed=args.seed, noise_sd=args.noise_sd,
        text_signal_share=args.text_signal_share,
        missingness=args.missingness, concept_coupling=args.coupling,
        label_weights=weights)
    cohort = generate_cohort(cfg)
    save_cohort(cohort, ws.cohort_path(args.name))
    cfg.save(os.path.join(ws.configs_dir, f"gen_{args.name}.json"))
    y = cohort.labels()
    return {"cohort": args.name, "n": len(cohort.records),
            "prevalence": float(y.mean()),
            "splits": {s: len(cohort.split_records(s))
                       for s in ("train", "validation", "test")}}


def cmd_preprocess(args) -> dict:
    ws = Workspace.from_env(args.workspace).ensure()
    cohort = _load_valid_cohort(ws, args.cohort, with_extracted=False)
    out_name = args.out or f"{args.cohort}_prep"
    processed, stats = preprocess(cohort, args.threshold)
    violations = validate_cohort(processed)
    if violations:
        raise CliError(f"preprocessing produced an invalid cohort: "
                       f"{violations[0].record_id}/{violations[0].field}: "
                       f"{violations[0].message}")
    out = ws.cohort_path(out_name)
    save_cohort(processed, out)
    stats.save(os.path.join(out, "stats.json"))
    return {"cohort": out_name, "dropped_features": list(stats.dropped_features),
            "n_features": processed.feature_schema.d}


def cmd_extract_concepts(args) -> dict:
    ws = Workspace.from_env(args.workspace).ensure()
    cohort = _load_valid_cohort(ws, args.cohort, with_extracted=False)
    if args.extractor == "mock":
        client = MockExtractor()
    else:
        if not args.url:
            raise CliError("--url is required for the http extractor")
        client = HttpExtractor(args.url)
    cfg = ChunkConfig(chunk_size=args.chunk_size, overlap=args.overlap)
    values = extract_all(cohort, client, cfg)
    names = [c.name for c in cohort.concept_schema.text]
    save_extracted(values, names, os.path.join(ws.cohort_path(args.cohort),
                                               "extracted.csv"))
    prevalence = {n: float(np.mean([values[r.id][n] for r in cohort.records]))
                  for n in names}
    doc = {"cohort": args.cohort, "extractor": args.extractor,
           "n_records": len(values), "prevalence": prevalence}
    have_truth = all(n in r.c_true for r in cohort.records for n in names)
    if have_truth:
        agree = {n: float(np.mean([values[r.id][n] == r.c_true[n]
                                   for r in cohort.records])) for n in names}
        doc["agreement_with_truth"] = agree
    return doc


def cmd_train(args) -> dict:
    ws = Workspace.from_env(args.workspace).ensure()
    cohort = _load_valid_cohort(ws, args.cohort)
    if not cohort.preprocessed:
        raise CliError(f"cohort {args.cohort} is not preprocessed; "
                       f"run the preprocess command first")
    stats = ws.load_stats(args.cohort)
    cfg = TrainConfig(context=args.context, mode=args.mode, lam=args.lam,
                      hidden_g=args.hidden_g, hidden_f=args.hidden_f,
                      lr=args.lr, epochs=args.epochs,
                      batch_size=args.batch_size, seed=args.seed)
    sh = schema_hash(cohort.feature_schema, cohort.concept_schema)
    model = train(cohort, cfg, sh)
    ws.save_model(args.name, model, stats, cohort.feature_schema,
                  cohort.concept_schema)
    probs, _ = predict_split(model, cohort, "validation")
    metrics = evaluate_predictions(cohort.labels("validation"), probs)
    return {"model": args.name, "cohort": args.cohort,
            "config": cfg.to_dict(), "validation": metrics}


def cmd_eval(args) -> dict:
    ws = Workspace.from_env(args.workspace).ensure()
    model, stats, fs, cs = ws.load_model(args.model)
    cohort = _load_valid_cohort(ws, args.cohort)
    probs, b = predict_split(model, cohort, args.split)
    y = cohort.labels(args.split)
    from .cbm import tabular_concept_matrix
    mae = concept_mae(b[:, :model.n_tabular],
                      tabular_concept_matrix(cohort, args.split))
    doc = {"model": args.model, "cohort": args.cohort, "split": args.split,
           "label_metrics": evaluate_predictions(y, probs),
           "concept_mae": dict(zip(model.tabular_names, mae.tolist())),
           "schema_hash": model.schema_hash}
    ws.save_report(f"eval_{args.model}_{args.split}", doc)
    return doc


def cmd_intervene(args) -> dict:
    ws = Workspace.from_env(args.workspace).ensure()
    model, stats, fs, cs = ws.load_model(args.model)
    cohort = _load_valid_cohort(ws, args.cohort)
    if args.concepts:
        concepts = [c.strip() for c in args.concepts.split(",") if c.strip()]
    elif args.top:
        concepts = top_concepts_by_correction(model, cohort, stats, args.top)
    else:
        raise CliError("pass --concepts or --top")
    value = args.value
    if value not in ("true", "median", "mean"):
        value = float(value)
    doc = run_intervention(model, cohort, stats, concepts, args.mode,
                           value, args.split, args.propagate)
    doc["model"] = args.model
    doc["cohort"] = args.cohort
    ws.save_report(f"intervene_{args.model}_{args.split}", doc)
    return doc


def cmd_audit_leakage(args) -> dict:
    ws = Workspace.from_env(args.workspace).ensure()
    model, stats, fs, cs = ws.load_model(args.model)
    cohort = _load_valid_cohort(ws, args.cohort)
    from .cbm import tabular_concept_matrix
    _, b = predict_split(model, cohort, args.split)
    c_hat = b[:, :model.n_tabular]
    c = tabular_concept_matrix(cohort, args.split)
    y = cohort.labels(args.split)
    ctl = concept_task_leakage(c_hat, c, y)
    icl = inter_concept_leakage(c_hat, c)
    names = list(model.tabular_names)
    doc = {"model": args.model, "cohort": args.cohort, "split": args.split,
           "ctl": dict(zip(names, ctl.tolist())),
           "icl": {"names": names, "matrix": icl.tolist()},
           "max_ctl": float(ctl.max()), "max_icl": float(icl.max())}
    ws.save_report(f"leakage_{args.model}_{args.split}", doc)
    return doc


def cmd_ablate(args) -> dict:
    ws = Workspace.from_env(args.workspace).ensure()
    cohort = _load_valid_cohort(ws, args.cohort)
    if not cohort.preprocessed:
        raise CliError(f"cohort {args.cohort} is not preprocessed")
    sh = schema_hash(cohort.feature_schema, cohort.concept_schema)
    y = cohort.labels(args.split)
    results = {}
    for lam in [float(v) for v in args.lams.split(",")]:
        cfg = TrainConfig(context=args.context, mode="joint", lam=lam,
                          epochs=args.epochs, seed=args.seed)
        model = train(cohort, cfg, sh)
        probs, _ = predict_split(model, cohort, args.split)
        results[str(lam)] = evaluate_predictions(y, probs)
    doc = {"cohort": args.cohort, "split": args.split, "context": args.context,
           "seed": args.seed, "by_lambda": results}
    ws.save_report(f"ablate_{args.cohort}", doc)
    return doc


def cmd_compare_baselines(args) -> dict:
    ws = Workspace.from_env(args.workspace).ensure()
    cohort = _load_valid_cohort(ws, args.cohort)
    if not cohort.preprocessed:
        raise CliError(f"cohort {args.cohort} is not preprocessed")
    sh = schema_hash(cohort.feature_schema, cohort.concept_schema)
    y = cohort.labels(args.split)
    out = {}
    for label, context in (("vanilla", False), ("context", True)):
        cfg = TrainConfig(context=context, mode=args.mode, lam=args.lam,
                          epochs=args.epochs, seed=args.seed)
        model = train(cohort, cfg, sh)
        probs, _ = predict_split(model, cohort, args.split)
        out[label] = evaluate_predictions(y, probs)
    doc = {"cohort": args.cohort, "split": args.split, "seed": args.seed,
           "vanilla": out["vanilla"], "context": out["context"],
           "accuracy_gain": out["context"]["accuracy"] - out["vanilla"]["accuracy"],
           "normalized_mi_ratio": (
               out["context"]["normalized_mi"] / out["vanilla"]["normalized_mi"]
               if out["vanilla"]["normalized_mi"] > 0 else None)}
    ws.save_report(f"baselines_{args.cohort}", doc)
    return doc


def cmd_serve(args) -> dict:
    import uvicorn

    from .service import create_app

    ws = Workspace.from_env(args.workspace)
    app = create_app(ws, args.model, args.cohort, frontend_dir=args.frontend)
    port = args.port or int(os.environ.get("CBMW_PORT", "8000"))
    uvicorn.run(app, host=args.host, port=port, log_level="warning")
    return {"served": args.model}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cbmw",
                                description="concept bottleneck workbench")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--workspace", default=None,
                        help="workspace root (default: $CBMW_WORKSPACE or ./workspace)")
    common.add_argument("--seed", type=int, default=0)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-cohort", parents=[common],
                       help="generate a synthetic cohort")
    g.add_argument("--name", required=True)
    g.add_argument("--n", type=int, default=400)
    g.add_argument("--noise-sd", type=float, default=0.05)
    g.add_argument("--text-signal-share", type=float, default=0.35)
    g.add_argument("--missingness", type=float, default=0.05)
    g.add_argument("--coupling", type=float, default=0.55)
    g.add_argument("--label-weights", default=None,
                   help="path to a JSON dict of concept weights")
    g.set_defaults(fn=cmd_gen_cohort)

    pp = sub.add_parser("preprocess", parents=[common],
                        help="drop sparse features, impute, scale")
    pp.add_argument("--cohort", required=True)
    pp.add_argument("--out", default=None)
    pp.add_argument("--threshold", type=float, default=0.5)
    pp.set_defaults(fn=cmd_preprocess)

    ex = sub.add_parser("extract-concepts", parents=[common],
                        help="extract text concepts from documents")
    ex.add_argument("--cohort", required=True)
    ex.add_argument("--extractor", choices=("mock", "http"), default="mock")
    ex.add_argument("--url", default=None)
    ex.add_argument("--chunk-size", type=int, default=256)
    ex.add_argument("--overlap", type=int, default=16)
    ex.set_defaults(fn=cmd_extract_concepts)

    tr = sub.add_parser("train", parents=[common], help="train a model")
    tr.add_argument("--cohort", required=True)
    tr.add_argument("--name", required=True)
    ctx = tr.add_mutually_exclusive_group()
    ctx.add_argument("--context", dest="context", action="store_true", default=True)
    ctx.add_argument("--no-context", dest="context", action="store_false")
    tr.add_argument("--mode", choices=("joint", "sequential"), default="joint")
    tr.add_argument("--lam", type=float, default=1.0)
    tr.add_argument("--hidden-g", type=int, default=64)
    tr.add_argument("--hidden-f", type=int, default=32)
    tr.add_argument("--lr", type=float, default=1e-3)
    tr.add_argument("--epochs", type=int, default=200)
    tr.add_argument("--batch-size", type=int, default=32)
    tr.set_defaults(fn=cmd_train)

    ev = sub.add_parser("eval", parents=[common], help="evaluate a model")
    ev.add_argument("--model", required=True)
    ev.add_argument("--cohort", required=True)
    ev.add_argument("--split", default="test")
    ev.set_defaults(fn=cmd_eval)

    iv = sub.add_parser("intervene", parents=[common],
                        help="run a bottleneck intervention")
    iv.add_argument("--model", required=True)
    iv.add_argument("--cohort", required=True)
    iv.add_argument("--split", default="test")
    iv.add_argument("--concepts", default=None, help="comma separated names")
    iv.add_argument("--top", type=int, default=None,
                    help="pick the top q concepts by validation corrections")
    iv.add_argument("--mode", choices=("independent", "correlated"),
                    default="independent")
    iv.add_argument("--value", default="true",
                    help="true | median | mean | number in [0,1]")
    iv.add_argument("--propagate", choices=("all", "tabular"), default="all")
    iv.set_defaults(fn=cmd_intervene)

    al = sub.add_parser("audit-leakage", parents=[common],
                        help="concept-task and inter-concept leakage")
    al.add_argument("--model", required=True)
    al.add_argument("--cohort", required=True)
    al.add_argument("--split", default="test")
    al.set_defaults(fn=cmd_audit_leakage)

    ab = sub.add_parser("ablate", parents=[common],
                        help="sweep the concept loss weight")
    ab.add_argument("--cohort", required=True)
    ab.add_argument("--split", default="test")
    ab.add_argument("--lams", default="0.1,1.0")
    ab.add_argument("--epochs", type=int, default=200)
    ctx2 = ab.add_mutually_exclusive_group()
    ctx2.add_argument("--context", dest="context", action="store_true", default=True)
    ctx2.add_argument("--no-context", dest="context", action="store_false")
    ab.set_defaults(fn=cmd_ablate)

    cb = sub.add_parser("compare-baselines", parents=[common],
                        help="vanilla vs context-aware on one cohort")
    cb.add_argument("--cohort", required=True)
    cb.add_argument("--split", default="test")
    cb.add_argument("--mode", choices=("joint", "sequential"), default="joint")
    cb.add_argument("--lam", type=float, default=1.0)
    cb.add_argument("--epochs", type=int, default=200)
    cb.set_defaults(fn=cmd_compare_baselines)

    sv = sub.add_parser("serve", parents=[common], help="run the HTTP service")
    sv.add_argument("--model", required=True)
    sv.add_argument("--cohort", required=True)
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--port", type=int, default=None,
                    help="default: $CBMW_PORT or 8000")
    sv.add_argument("--frontend", default=None,
                    help="serve a built UI directory under /ui")
    sv.set_defaults(fn=cmd_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _print(args.fn(args))
        return 0
    except Exception as exc:  # surface everything as machine-readable JSON
        _print({"error": f"{type(exc).__name__}: {exc}"})
        return 1


if __name__ == "__main__":
    sys.exit(main())
