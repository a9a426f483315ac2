"""End-to-end orchestration: explanations -> parses -> filters -> label
matrix -> marginals -> classifier -> metrics.

Every stage writes its artifact to the output directory so any stage can be
re-run standalone from files:

    candidates.jsonl   one candidate logical form per line
    filter_report.json filter-bank verdicts and counts
    lfs.jsonl          surviving functions with coverage
    label_matrix.jsonl one vote row per function
    weights.json       generative weights and final objective
    marginals.json     probabilistic labels over the pool
    model.json         discriminative model
    report.json        the run report (byte-stable across reruns)
    timings.json       wall-clock per stage (excluded from report.json so
                       identical configs produce identical reports)

The master seed fans out per stage through a name hash, so rerunning one
stage in isolation sees the same randomness. Direct-aggregation rows are
evaluated with exact marginals under the fitted weights; the gibbs mode
affects training only.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .aggregator import (
    GenerativeConfig,
    GenerativeWeights,
    LabelMatrix,
    build_label_matrix,
    exact_marginals,
    fit_generative,
    gibbs_marginals,
    GibbsConfig,
    log_marginal_likelihood,
    majority_vote,
)
from .corpus import (
    Dataset,
    Example,
    load_aliases,
    load_examples,
    load_explanations,
)
from .discriminative import (
    LinearModel,
    PRF,
    TrainConfig,
    evaluate,
    extract_features,
    train_noise_aware,
)
from .execution import coverage
from .filterbank import CandidateLF, FilterReport, run_filter_bank
from .grammar import build_default_grammar
from .lf import LogicalForm, lf_from_sexpr, lf_to_sexpr
from .parsing import parse_all

__all__ = [
    "PipelineConfig",
    "RunReport",
    "PipelineError",
    "ConfigError",
    "run_pipeline",
    "run_on_dataset",
    "scaling_experiment",
    "stage_seed",
    "load_dataset",
]


class PipelineError(Exception):
    def __init__(self, message: str, filter_report: FilterReport | None = None):
        super().__init__(message)
        self.filter_report = filter_report


class ConfigError(PipelineError):
    """Invalid configuration (bad keys, missing files); caught before any stage runs."""


def stage_seed(master_seed: int, stage: str) -> int:
    digest = hashlib.sha256(f"{master_seed}:{stage}".encode()).digest()
    return int.from_bytes(digest[:4], "big")


@dataclass(frozen=True)
class PipelineConfig:
    examples: str = ""
    explanations: str = ""
    aliases: str | None = None
    dev: str | None = None
    test: str | None = None
    out_dir: str = "out"
    seed: int = 0
    max_skip: int = 2
    beam: int = 100
    filter_bank: bool = True
    aggregator_mode: str = "exact"  # exact | gibbs
    aggregator_lr: float = 0.3
    aggregator_epochs: int = 300
    aggregator_l2: float = 0.0
    aggregator_init_acc: float = 1.0
    gibbs_samples: int = 500
    gibbs_burn_in: int = 50
    disc_lr: float = 0.5
    disc_epochs: int = 300
    disc_l2: float = 1e-4
    disc_subsample: float = 0.0

    @classmethod
    def from_json(cls, path: str | Path, **overrides) -> "PipelineConfig":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        known = {f for f in cls.__dataclass_fields__}
        bad = set(obj) - known
        if bad:
            raise ConfigError(f"unknown config keys: {sorted(bad)}")
        obj.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**obj)

    def validate_files(self) -> None:
        for label, p in (
            ("examples", self.examples),
            ("explanations", self.explanations),
            ("aliases", self.aliases),
            ("dev", self.dev),
            ("test", self.test),
        ):
            if p and not Path(p).exists():
                raise ConfigError(f"{label} file does not exist: {p}")
        if not self.examples or not self.explanations:
            raise ConfigError("config must name examples and explanations files")


@dataclass
class RunReport:
    filter_report: dict
    lf_roster: list[dict]
    aggregator_mode: str
    final_objective: float
    metrics: dict[str, dict[str, dict]]  # method -> split -> PRF dict
    parse_errors: dict[str, str] = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "filter_report": self.filter_report,
            "lf_roster": self.lf_roster,
            "aggregator_mode": self.aggregator_mode,
            "final_objective": self.final_objective,
            "metrics": self.metrics,
            "parse_errors": dict(sorted(self.parse_errors.items())),
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, ensure_ascii=False)


def load_dataset(config: PipelineConfig) -> Dataset:
    """Assemble a Dataset from files. The examples file holds the unlabeled
    pool; explanation-referenced examples form the labeled subset (and stay
    in the pool, mirroring the subset-of-pool regime)."""
    config.validate_files()
    pool = load_examples(config.examples)
    by_id = {ex.id: ex for ex in pool}
    explanations = load_explanations(config.explanations, by_id)
    labeled = tuple((by_id[e.example_id], e) for e in explanations)
    dev = tuple(load_examples(config.dev)) if config.dev else ()
    test = tuple(load_examples(config.test)) if config.test else ()
    aliases = load_aliases(config.aliases) if config.aliases else {}
    return Dataset(
        labeled_subset=labeled,
        unlabeled_pool=tuple(pool),
        dev=dev,
        test=test,
        aliases=aliases,
    )


def _evaluate_probs(probs: Sequence[float], split: Sequence[Example]) -> dict:
    return evaluate(list(probs), list(split)).to_dict()


def _three_rows(
    lfs: Sequence[CandidateLF],
    w: GenerativeWeights,
    model: LinearModel,
    split: Sequence[Example],
) -> dict[str, dict]:
    from .discriminative import predict

    L_split = build_label_matrix(list(lfs), list(split))
    rows = {
        "majority_vote": _evaluate_probs(majority_vote(L_split).p, split),
        "aggregator": _evaluate_probs(exact_marginals(w, L_split).p, split),
        "discriminative": _evaluate_probs([predict(model, ex) for ex in split], split),
    }
    return rows


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False), encoding="utf-8")


def run_on_dataset(
    dataset: Dataset,
    config: PipelineConfig,
    *,
    out_dir: Path | None = None,
    inject_candidates: Callable[[dict[str, list[LogicalForm]]], dict[str, list[LogicalForm]]] | None = None,
) -> tuple[RunReport, dict[str, float]]:
    """Run all stages on an in-memory dataset. Returns (report, timings).

    ``inject_candidates`` lets experiments splice extra candidate forms in
    between parsing and filtering (used to study what the filter bank buys).
    """
    timings: dict[str, float] = {}
    artifacts = out_dir

    def tick(stage: str, started: float) -> None:
        timings[stage] = time.perf_counter() - started

    t0 = time.perf_counter()
    grammar = build_default_grammar(dataset.aliases, max_skip=config.max_skip, beam=config.beam)
    tick("grammar", t0)

    t0 = time.perf_counter()
    parsed = parse_all(grammar, dataset.explanations)
    candidates = parsed.candidates
    if inject_candidates is not None:
        candidates = inject_candidates({k: list(v) for k, v in candidates.items()})
    tick("parse", t0)

    if artifacts:
        with (artifacts / "candidates.jsonl").open("w", encoding="utf-8") as fh:
            for expl_id in sorted(candidates):
                for lf in candidates[expl_id]:
                    fh.write(
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

    t0 = time.perf_counter()
    if config.filter_bank:
        survivors, filter_report = run_filter_bank(candidates, dataset)
    else:
        # evaluation-only escape hatch: keep everything, with ids assigned
        survivors = []
        filter_report = FilterReport()
        for expl_id in sorted(candidates):
            ordered = sorted(candidates[expl_id], key=lambda lf: lf.sort_key())
            filter_report.candidates_in += len(ordered)
            for k, lf in enumerate(ordered):
                lf_id = f"{expl_id}#{k}"
                survivors.append(CandidateLF(lf_id, expl_id, lf))
                filter_report.verdicts[lf_id] = "kept"
        filter_report.survivors = len(survivors)
    tick("filter", t0)

    if not survivors:
        raise PipelineError("filter bank eliminated all candidates", filter_report)

    if artifacts:
        _write_json(artifacts / "filter_report.json", filter_report.to_dict())

    t0 = time.perf_counter()
    L = build_label_matrix(survivors, list(dataset.unlabeled_pool))
    tick("label_matrix", t0)

    roster = [
        {
            "lf_id": c.lf_id,
            "explanation_id": c.explanation_id,
            "lf": lf_to_sexpr(c.lf),
            "coverage": coverage(L.data[i]),
        }
        for i, c in enumerate(survivors)
    ]

    if artifacts:
        with (artifacts / "lfs.jsonl").open("w", encoding="utf-8") as fh:
            for row in roster:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
        with (artifacts / "label_matrix.jsonl").open("w", encoding="utf-8") as fh:
            for i, c in enumerate(survivors):
                fh.write(
                    json.dumps({"lf_id": c.lf_id, "votes": L.data[i].tolist()}, sort_keys=True) + "\n"
                )

    t0 = time.perf_counter()
    gen_cfg = GenerativeConfig(
        lr=config.aggregator_lr,
        epochs=config.aggregator_epochs,
        seed=stage_seed(config.seed, "aggregator"),
        gradient_mode=config.aggregator_mode,
        l2=config.aggregator_l2,
        init_acc=config.aggregator_init_acc,
        gibbs_samples=config.gibbs_samples,
        gibbs_burn_in=config.gibbs_burn_in,
    )
    w = fit_generative(L, gen_cfg)
    final_objective = -log_marginal_likelihood(w, L)
    tick("fit_generative", t0)

    t0 = time.perf_counter()
    if config.aggregator_mode == "gibbs":
        marg = gibbs_marginals(
            w, L, GibbsConfig(seed=stage_seed(config.seed, "gibbs_marginals"))
        )
    else:
        marg = exact_marginals(w, L)
    tick("marginals", t0)

    if artifacts:
        _write_json(
            artifacts / "weights.json",
            {
                "lf_ids": list(L.lf_ids),
                "w_lab": w.w_lab.tolist(),
                "w_acc": w.w_acc.tolist(),
                "final_objective": final_objective,
            },
        )
        _write_json(
            artifacts / "marginals.json",
            {"example_ids": list(L.example_ids), "p": marg.p.tolist()},
        )

    t0 = time.perf_counter()
    feats = [extract_features(ex) for ex in dataset.unlabeled_pool]
    disc_cfg = TrainConfig(
        lr=config.disc_lr,
        epochs=config.disc_epochs,
        l2=config.disc_l2,
        seed=stage_seed(config.seed, "discriminative"),
        subsample=config.disc_subsample,
    )
    model = train_noise_aware(feats, marg.p, disc_cfg)
    tick("train", t0)

    if artifacts:
        _write_json(artifacts / "model.json", model.to_json())

    t0 = time.perf_counter()
    metrics: dict[str, dict[str, dict]] = {"majority_vote": {}, "aggregator": {}, "discriminative": {}}
    for split_name, split in (("dev", dataset.dev), ("test", dataset.test)):
        if not split:
            continue
        rows = _three_rows(survivors, w, model, split)
        for method, prf in rows.items():
            metrics[method][split_name] = prf
    tick("evaluate", t0)

    report = RunReport(
        filter_report=filter_report.to_dict(),
        lf_roster=roster,
        aggregator_mode=config.aggregator_mode,
        final_objective=final_objective,
        metrics=metrics,
        parse_errors=getattr(parsed, "errors", {}),
        config={
            "seed": config.seed,
            "max_skip": config.max_skip,
            "beam": config.beam,
            "filter_bank": config.filter_bank,
            "aggregator_mode": config.aggregator_mode,
        },
    )
    if artifacts:
        (artifacts / "report.json").write_text(report.to_json(), encoding="utf-8")
        _write_json(artifacts / "timings.json", timings)
    return report, timings


def run_pipeline(config: PipelineConfig) -> RunReport:
    """Load files, run every stage, write all artifacts."""
    config.validate_files()
    dataset = load_dataset(config)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report, _ = run_on_dataset(dataset, config, out_dir=out)
    return report


def scaling_experiment(
    dataset: Dataset,
    config: PipelineConfig,
    pool_sizes: Sequence[int],
) -> list[dict]:
    """Re-run aggregation and training on nested pool prefixes with fixed
    labeling functions; returns one row of metrics per size."""
    if len(pool_sizes) < 2:
        raise PipelineError("need at least two pool sizes")
    if any(s > len(dataset.unlabeled_pool) for s in pool_sizes):
        raise PipelineError("pool size exceeds available pool")
    if any(b < a for a, b in zip(pool_sizes, pool_sizes[1:])):
        raise PipelineError("pool sizes must be ascending")

    grammar = build_default_grammar(dataset.aliases, max_skip=config.max_skip, beam=config.beam)
    parsed = parse_all(grammar, dataset.explanations)
    survivors, filter_report = run_filter_bank(parsed.candidates, dataset)
    if not survivors:
        raise PipelineError("filter bank eliminated all candidates", filter_report)

    rows = []
    for size in pool_sizes:
        prefix = list(dataset.unlabeled_pool[:size])
        L = build_label_matrix(survivors, prefix)
        gen_cfg = GenerativeConfig(
            lr=config.aggregator_lr,
            epochs=config.aggregator_epochs,
            seed=stage_seed(config.seed, f"aggregator@{size}"),
            gradient_mode="exact",
            l2=config.aggregator_l2,
            init_acc=config.aggregator_init_acc,
        )
        w = fit_generative(L, gen_cfg)
        marg = exact_marginals(w, L)
        feats = [extract_features(ex) for ex in prefix]
        model = train_noise_aware(
            feats,
            marg.p,
            TrainConfig(
                lr=config.disc_lr,
                epochs=config.disc_epochs,
                l2=config.disc_l2,
                seed=stage_seed(config.seed, f"discriminative@{size}"),
                subsample=config.disc_subsample,
            ),
        )
        row: dict = {"pool_size": size}
        for split_name, split in (("dev", dataset.dev), ("test", dataset.test)):
            if split:
                row[split_name] = _three_rows(survivors, w, model, split)
        rows.append(row)
    return rows


def load_candidates_file(path: str | Path) -> dict[str, list[LogicalForm]]:
    out: dict[str, list[LogicalForm]] = {}
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            lf = lf_from_sexpr(rec["lf"])
            lf = LogicalForm(lf.polarity, lf.condition, rec.get("skipped", 0), rec.get("size", 0))
            out.setdefault(rec["explanation_id"], []).append(lf)
    return out
