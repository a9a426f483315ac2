import json
from pathlib import Path

import pytest

from babble.corpus import save_examples, save_explanations
from babble.pipeline import (
    ConfigError,
    PipelineConfig,
    PipelineError,
    load_dataset,
    run_on_dataset,
    run_pipeline,
    scaling_experiment,
    stage_seed,
)
from babble.synth import Cue, SynthSpec, synth_corpus

BALANCED = SynthSpec(
    n_pool=400,
    n_dev=100,
    n_test=120,
    pos_cues=(Cue("wed", 0.8, 0.04), Cue("married", 0.55, 0.03)),
    neg_cues=(Cue("sued", 0.8, 0.04), Cue("divorced", 0.55, 0.03)),
    heldout_pos_cues=(Cue("honeymoon", 0.6, 0.02),),
)


def fast_config(**kw):
    defaults = dict(aggregator_epochs=120, disc_epochs=120)
    defaults.update(kw)
    return PipelineConfig(**defaults)


def write_corpus(tmp_path, ds):
    pool_and_labeled = list(ds.unlabeled_pool) + [ex for ex, _ in ds.labeled_subset]
    save_examples(tmp_path / "examples.jsonl", pool_and_labeled)
    save_explanations(tmp_path / "explanations.jsonl", ds.explanations)
    save_examples(tmp_path / "dev.jsonl", ds.dev)
    save_examples(tmp_path / "test.jsonl", ds.test)
    return PipelineConfig(
        examples=str(tmp_path / "examples.jsonl"),
        explanations=str(tmp_path / "explanations.jsonl"),
        dev=str(tmp_path / "dev.jsonl"),
        test=str(tmp_path / "test.jsonl"),
        out_dir=str(tmp_path / "out"),
        aggregator_epochs=120,
        disc_epochs=120,
    )


def test_run_on_dataset_produces_three_rows():
    ds = synth_corpus(BALANCED, seed=1)
    report, timings = run_on_dataset(ds, fast_config())
    for method in ("majority_vote", "aggregator", "discriminative"):
        for split in ("dev", "test"):
            assert 0.0 <= report.metrics[method][split]["f1"] <= 1.0
    assert report.filter_report["survivors"] >= 1
    assert set(timings) >= {"parse", "filter", "label_matrix", "fit_generative", "train", "evaluate"}


def test_discriminative_close_to_or_above_direct():
    ds = synth_corpus(BALANCED, seed=2)
    report, _ = run_on_dataset(ds, fast_config())
    disc = report.metrics["discriminative"]["test"]["f1"]
    direct = report.metrics["aggregator"]["test"]["f1"]
    assert disc >= direct - 0.02


def test_end_to_end_determinism(tmp_path):
    ds = synth_corpus(BALANCED, seed=3)
    config = write_corpus(tmp_path, ds)
    report1 = run_pipeline(config)
    first = (Path(config.out_dir) / "report.json").read_bytes()
    report2 = run_pipeline(config)
    second = (Path(config.out_dir) / "report.json").read_bytes()
    assert first == second
    assert report1.to_json() == report2.to_json()


def test_artifacts_written_and_reloadable(tmp_path):
    ds = synth_corpus(BALANCED, seed=4)
    config = write_corpus(tmp_path, ds)
    run_pipeline(config)
    out = Path(config.out_dir)
    for name in (
        "candidates.jsonl",
        "filter_report.json",
        "lfs.jsonl",
        "label_matrix.jsonl",
        "weights.json",
        "marginals.json",
        "model.json",
        "report.json",
        "timings.json",
    ):
        assert (out / name).exists(), name
    report = json.loads((out / "report.json").read_text())
    assert "timings" not in report  # wall clock lives in the sidecar
    weights = json.loads((out / "weights.json").read_text())
    assert len(weights["w_acc"]) == report["filter_report"]["survivors"]
    marg = json.loads((out / "marginals.json").read_text())
    # the labeled subset stays in the pool, so marginals cover both
    assert len(marg["p"]) == len(ds.unlabeled_pool) + len(ds.labeled_subset)


def test_seed_isolation_discriminative_only(tmp_path):
    # changing only the classifier stage seed leaves the filter report and
    # label matrix byte-identical
    ds = synth_corpus(BALANCED, seed=5)
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    out_a.mkdir()
    out_b.mkdir()
    run_on_dataset(ds, fast_config(seed=100), out_dir=out_a)
    run_on_dataset(ds, fast_config(seed=100, disc_subsample=0.1), out_dir=out_b)
    for name in ("filter_report.json", "label_matrix.jsonl", "weights.json", "marginals.json"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name
    assert (out_a / "model.json").read_bytes() != (out_b / "model.json").read_bytes()


def test_stage_seeds_differ_by_stage():
    assert stage_seed(0, "aggregator") != stage_seed(0, "discriminative")
    assert stage_seed(0, "aggregator") != stage_seed(1, "aggregator")
    assert stage_seed(7, "x") == stage_seed(7, "x")


def test_missing_file_rejected_before_running(tmp_path):
    config = PipelineConfig(
        examples=str(tmp_path / "nope.jsonl"),
        explanations=str(tmp_path / "also-nope.jsonl"),
        out_dir=str(tmp_path / "out"),
    )
    with pytest.raises(ConfigError):
        run_pipeline(config)
    assert not (tmp_path / "out").exists()


def test_config_rejects_unknown_keys(tmp_path):
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps({"examples": "x", "explanations": "y", "bogus": 1}))
    with pytest.raises(ConfigError):
        PipelineConfig.from_json(cfg)


def test_zero_survivors_error_carries_report():
    ds = synth_corpus(BALANCED, seed=6)

    def inject_inconsistent(candidates):
        from babble.lf import LogicalForm, boolean

        # always-abstaining candidates fail the semantic filter everywhere
        return {k: [LogicalForm(1, boolean(False))] for k in candidates}

    with pytest.raises(PipelineError) as err:
        run_on_dataset(ds, fast_config(), inject_candidates=inject_inconsistent)
    assert err.value.filter_report is not None
    assert "eliminated" in str(err.value)


def test_filter_bank_disabled_keeps_everything():
    ds = synth_corpus(BALANCED, seed=7)

    def inject(candidates):
        from babble.lf import LogicalForm, boolean

        for k in candidates:
            candidates[k] = list(candidates[k]) + [LogicalForm(1, boolean(True))]
        return candidates

    report_off, _ = run_on_dataset(ds, fast_config(filter_bank=False), inject_candidates=inject)
    assert report_off.filter_report["discarded_semantic"] == 0
    assert report_off.filter_report["survivors"] == report_off.filter_report["candidates_in"]


def test_load_dataset_joins_explanations(tmp_path):
    ds = synth_corpus(BALANCED, seed=8)
    config = write_corpus(tmp_path, ds)
    loaded = load_dataset(config)
    assert len(loaded.labeled_subset) == len(ds.labeled_subset)
    assert len(loaded.unlabeled_pool) == len(ds.unlabeled_pool) + len(ds.labeled_subset)
    assert all(ex.gold_label is not None for ex in loaded.dev)


# ---------------------------------------------------------------------------
# scaling
# ---------------------------------------------------------------------------


def test_scaling_experiment_rows():
    ds = synth_corpus(BALANCED, seed=9)
    rows = scaling_experiment(ds, fast_config(), [100, 250, 400])
    assert [r["pool_size"] for r in rows] == [100, 250, 400]
    for row in rows:
        assert "discriminative" in row["test"]


def test_scaling_equal_sizes_identical():
    ds = synth_corpus(BALANCED, seed=10)
    rows = scaling_experiment(ds, fast_config(), [250, 250])
    assert rows[0]["test"] == rows[1]["test"]


def test_scaling_validations():
    ds = synth_corpus(BALANCED, seed=11)
    with pytest.raises(PipelineError):
        scaling_experiment(ds, fast_config(), [250])
    with pytest.raises(PipelineError):
        scaling_experiment(ds, fast_config(), [250, 10_000])
    with pytest.raises(PipelineError):
        scaling_experiment(ds, fast_config(), [400, 250])
