"""Command-line interface.

Exit codes: 0 success, 2 validation error (bad arguments, missing files),
1 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .aggregator import (
    GenerativeConfig,
    GenerativeWeights,
    GibbsConfig,
    LabelMatrix,
    build_label_matrix,
    exact_marginals,
    fit_generative,
    gibbs_marginals,
    log_marginal_likelihood,
)
from .corpus import (
    CorpusError,
    load_aliases,
    load_examples,
    save_examples,
    save_explanations,
)
from .discriminative import (
    LinearModel,
    TrainConfig,
    evaluate,
    extract_features,
    train_noise_aware,
)
from .execution import EvalContext, evaluate as eval_expr, execute
from .filterbank import CandidateLF, run_filter_bank
from .grammar import GrammarError, build_default_grammar
from .lf import LfError, lf_from_sexpr, lf_to_sexpr
from .parsing import parse_all
from .pipeline import (
    ConfigError,
    PipelineConfig,
    PipelineError,
    load_candidates_file,
    load_dataset,
    run_pipeline,
    scaling_experiment,
)
from .synth import Cue, SynthSpec, synth_corpus

VALIDATION_EXIT = 2
RUNTIME_EXIT = 1


class CliError(Exception):
    def __init__(self, message: str, code: int = VALIDATION_EXIT):
        super().__init__(message)
        self.code = code


def _write_json(path: str, obj) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False), encoding="utf-8")


def _config_from_args(args) -> PipelineConfig:
    overrides = {
        k: getattr(args, k, None)
        for k in (
            "examples",
            "explanations",
            "aliases",
            "dev",
            "test",
            "out_dir",
            "seed",
            "max_skip",
            "beam",
        )
    }
    if getattr(args, "mode", None):
        overrides["aggregator_mode"] = args.mode
    if getattr(args, "no_filter_bank", False):
        overrides["filter_bank"] = False
    if args.config:
        return PipelineConfig.from_json(args.config, **overrides)
    clean = {k: v for k, v in overrides.items() if v is not None}
    return PipelineConfig(**clean)


def cmd_parse(args) -> int:
    if args.grammar_dump:
        aliases = load_aliases(args.aliases) if args.aliases else {}
        print(build_default_grammar(aliases).dump())
        return 0
    if not args.explanations or not args.examples:
        raise CliError("parse requires --explanations and --examples (or --grammar-dump)")
    examples = load_examples(args.examples)
    by_id = {ex.id: ex for ex in examples}
    from .corpus import load_explanations

    explanations = load_explanations(args.explanations, by_id)
    aliases = load_aliases(args.aliases) if args.aliases else {}
    grammar = build_default_grammar(aliases, max_skip=args.max_skip or 2, beam=args.beam or 100)
    result = parse_all(grammar, explanations)
    out = sys.stdout if not args.out else open(args.out, "w", encoding="utf-8")
    try:
        for expl_id in sorted(result.candidates):
            for lf in result.candidates[expl_id]:
                out.write(
                    json.dumps(
                        {
                            "explanation_id": expl_id,
                            "lf": lf_to_sexpr(lf),
                            "skipped": lf.skipped,
                            "size": lf.size,
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )
    finally:
        if args.out:
            out.close()
    if result.errors:
        print(json.dumps({"errors": result.errors}, sort_keys=True), file=sys.stderr)
    print(f"parsed {len(result.candidates)} explanations in {result.wall_clock:.2f}s", file=sys.stderr)
    return 0


def cmd_filter(args) -> int:
    config = PipelineConfig(
        examples=args.examples, explanations=args.explanations, aliases=args.aliases
    )
    dataset = load_dataset(config)
    candidates = load_candidates_file(args.candidates)
    survivors, report = run_filter_bank(candidates, dataset)
    if args.report:
        _write_json(args.report, report.to_dict())
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            for c in survivors:
                fh.write(
                    json.dumps(
                        {"lf_id": c.lf_id, "explanation_id": c.explanation_id, "lf": lf_to_sexpr(c.lf)},
                        sort_keys=True,
                    )
                    + "\n"
                )
    if args.report_table:
        print(report.table())
    else:
        print(json.dumps(report.to_dict(), sort_keys=True, indent=2))
    return 0


def _load_lfs_file(path: str) -> list[CandidateLF]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            out.append(CandidateLF(rec["lf_id"], rec.get("explanation_id", ""), lf_from_sexpr(rec["lf"])))
    return out


def cmd_aggregate(args) -> int:
    lfs = _load_lfs_file(args.lfs)
    pool = load_examples(args.examples)
    L = build_label_matrix(lfs, pool)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with (out_dir / "label_matrix.jsonl").open("w", encoding="utf-8") as fh:
        for i, c in enumerate(lfs):
            fh.write(json.dumps({"lf_id": c.lf_id, "votes": L.data[i].tolist()}, sort_keys=True) + "\n")
    cfg = GenerativeConfig(seed=args.seed, gradient_mode=args.mode)
    w = fit_generative(L, cfg)
    _write_json(
        str(out_dir / "weights.json"),
        {
            "lf_ids": list(L.lf_ids),
            "w_lab": w.w_lab.tolist(),
            "w_acc": w.w_acc.tolist(),
            "final_objective": -log_marginal_likelihood(w, L),
        },
    )
    if args.mode == "gibbs":
        marg = gibbs_marginals(w, L, GibbsConfig(samples=args.samples, burn_in=args.burn_in, seed=args.seed))
    else:
        marg = exact_marginals(w, L)
    _write_json(str(out_dir / "marginals.json"), {"example_ids": list(L.example_ids), "p": marg.p.tolist()})
    print(f"aggregated {L.m} functions over {L.n} examples ({args.mode} mode)")
    return 0


def cmd_train(args) -> int:
    pool = load_examples(args.examples)
    marg = json.loads(Path(args.marginals).read_text(encoding="utf-8"))
    by_id = {ex.id: ex for ex in pool}
    ids = marg["example_ids"]
    missing = [i for i in ids if i not in by_id]
    if missing:
        raise CliError(f"marginals reference unknown examples, e.g. {missing[0]!r}")
    feats = [extract_features(by_id[i]) for i in ids]
    model = train_noise_aware(feats, marg["p"], TrainConfig(seed=args.seed))
    model.save(args.model_out)
    print(f"trained on {len(ids)} examples; {len(model.weights)} active features")
    return 0


def cmd_eval(args) -> int:
    examples = load_examples(args.examples)
    if args.model:
        model = LinearModel.load(args.model)
        prf = evaluate(model, examples)
    elif args.marginals:
        marg = json.loads(Path(args.marginals).read_text(encoding="utf-8"))
        by_id = {i: p for i, p in zip(marg["example_ids"], marg["p"])}
        missing = [ex.id for ex in examples if ex.id not in by_id]
        if missing:
            raise CliError(f"marginals missing examples, e.g. {missing[0]!r}")
        prf = evaluate([by_id[ex.id] for ex in examples], examples)
    else:
        raise CliError("eval requires --model or --marginals")
    print(json.dumps(prf.to_dict(), sort_keys=True, indent=2))
    return 0


def cmd_execute(args) -> int:
    examples = load_examples(args.examples)
    by_id = {ex.id: ex for ex in examples}
    if args.example_id not in by_id:
        raise CliError(f"unknown example id {args.example_id!r}")
    lf = lf_from_sexpr(args.lf)
    ex = by_id[args.example_id]
    label = execute(lf, ex)
    print(f"label: {label:+d}" if label else "label: 0 (abstain)")
    if args.trace:
        ctx = EvalContext.from_example(ex)

        from .lf import to_sexpr as node_sexpr

        def walk(e, depth):
            try:
                val = eval_expr(e, ctx)
            except LfError as exc:
                val = f"<error: {exc}>"
            print("  " * depth + f"{node_sexpr(e)} = {val!r}")
            for a in e.args:
                walk(a, depth + 1)

        walk(lf.condition, 0)
    return 0


def cmd_run(args) -> int:
    config = _config_from_args(args)
    report = run_pipeline(config)
    print(report.to_json())
    return 0


def cmd_scale(args) -> int:
    config = _config_from_args(args)
    sizes = [int(s) for s in args.sizes.split(",")]
    dataset = load_dataset(config)
    rows = scaling_experiment(dataset, config, sizes)
    out = json.dumps(rows, sort_keys=True, indent=2)
    if args.out:
        Path(args.out).write_text(out, encoding="utf-8")
    print(out)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    config = _config_from_args(args)
    app = create_app(ServiceConfig(pipeline=config, static_dir=args.static_dir))
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def cmd_synth(args) -> int:
    spec = SynthSpec(
        n_pool=args.pool,
        n_dev=args.dev_size,
        n_test=args.test_size,
        pos_cues=tuple(Cue(p) for p in args.pos_cue),
        neg_cues=tuple(Cue(p) for p in args.neg_cue),
        noise=args.noise,
    )
    ds = synth_corpus(spec, args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pool_and_labeled = list(ds.unlabeled_pool) + [ex for ex, _ in ds.labeled_subset]
    save_examples(out / "examples.jsonl", pool_and_labeled)
    save_explanations(out / "explanations.jsonl", ds.explanations)
    save_examples(out / "dev.jsonl", ds.dev)
    save_examples(out / "test.jsonl", ds.test)
    print(f"wrote {len(pool_and_labeled)} examples, {len(ds.explanations)} explanations to {out}")
    return 0


def build_arg_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="babble", description=__doc__)
    top.add_argument("--version", action="version", version=f"babble {__version__}")
    sub = top.add_subparsers(dest="command", required=True)

    def common_io(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--examples")
        p.add_argument("--explanations")
        p.add_argument("--aliases")
        p.add_argument("--dev")
        p.add_argument("--test")
        p.add_argument("--out-dir", dest="out_dir")
        p.add_argument("--seed", type=int)
        p.add_argument("--max-skip", dest="max_skip", type=int)
        p.add_argument("--beam", type=int)

    p = sub.add_parser("parse", help="parse explanations into candidate logical forms")
    p.add_argument("--grammar-dump", action="store_true", help="print the rule set and exit")
    p.add_argument("--explanations")
    p.add_argument("--examples")
    p.add_argument("--aliases")
    p.add_argument("--out")
    p.add_argument("--max-skip", dest="max_skip", type=int)
    p.add_argument("--beam", type=int)
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("filter", help="run the filter bank over candidates")
    p.add_argument("--candidates", required=True)
    p.add_argument("--examples", required=True)
    p.add_argument("--explanations", required=True)
    p.add_argument("--aliases")
    p.add_argument("--out")
    p.add_argument("--report")
    p.add_argument("--report-table", action="store_true")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("aggregate", help="build the label matrix and fit the generative model")
    p.add_argument("--lfs", required=True)
    p.add_argument("--examples", required=True)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--mode", choices=("exact", "gibbs"), default="exact")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=20000)
    p.add_argument("--burn-in", dest="burn_in", type=int, default=1000)
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("train", help="train the noise-aware classifier")
    p.add_argument("--examples", required=True)
    p.add_argument("--marginals", required=True)
    p.add_argument("--model-out", dest="model_out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a model or marginals on labeled examples")
    p.add_argument("--examples", required=True)
    p.add_argument("--model")
    p.add_argument("--marginals")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("execute", help="run one logical form on one example with a trace")
    p.add_argument("--examples", required=True)
    p.add_argument("--example-id", dest="example_id", required=True)
    p.add_argument("--lf", required=True, help="logical form s-expression")
    p.add_argument("--trace", action="store_true")
    p.set_defaults(func=cmd_execute)

    p = sub.add_parser("run", help="run the full pipeline")
    common_io(p)
    p.add_argument("--mode", choices=("exact", "gibbs"))
    p.add_argument("--no-filter-bank", action="store_true", help="evaluation-only: keep all candidates")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("scale", help="rerun aggregation+training on nested pool prefixes")
    common_io(p)
    p.add_argument("--sizes", required=True, help="comma-separated ascending pool sizes")
    p.add_argument("--out")
    p.set_defaults(func=cmd_scale)

    p = sub.add_parser("serve", help="serve the workbench HTTP API")
    common_io(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--static-dir", dest="static_dir", default="frontend/dist")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("synth", help="generate a synthetic corpus for desk-scale runs")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--pool", type=int, default=1000)
    p.add_argument("--dev-size", type=int, default=150)
    p.add_argument("--test-size", type=int, default=300)
    p.add_argument("--pos-cue", action="append", default=["wed"])
    p.add_argument("--neg-cue", action="append", default=["sued"])
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    return top


def main(argv=None) -> int:
    parser = build_arg_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (CorpusError, GrammarError, LfError, ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return VALIDATION_EXIT
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.filter_report is not None:
            print(json.dumps(exc.filter_report.to_dict(), sort_keys=True), file=sys.stderr)
        return RUNTIME_EXIT
    except Exception as exc:  # pragma: no cover - last resort
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_EXIT


if __name__ == "__main__":
    sys.exit(main())
