"""Discard incorrect candidate labeling functions without ground truth.

Stages, applied in order:

1. semantic: a candidate must reproduce the annotator's label on the
   explanation's own example (abstaining counts as failure);
2. constant: a candidate whose signature over the pool is all one value
   (including all-abstain) carries no signal;
3. duplicate: candidates labeling the pool identically are redundant; one
   representative per signature survives (smallest derivation, then
   canonical order);
4. most specific: of the candidates remaining for one explanation, only the
   lowest-coverage one survives, so a single explanation cannot flood the
   label matrix with correlated functions.

Every decision is recorded in a FilterReport whose counts reconcile:
candidates_in = discarded_semantic + discarded_pragmatic + survivors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .corpus import Dataset, Example
from .execution import EvalContext, coverage, execute_on_context
from .lf import LogicalForm, lf_to_sexpr

__all__ = [
    "CandidateLF",
    "FilterReport",
    "FilterBankError",
    "semantic_filter",
    "constant_filter",
    "duplicate_filter",
    "most_specific_per_explanation",
    "run_filter_bank",
    "SIGNATURE_SAMPLE_CAP",
]

SIGNATURE_SAMPLE_CAP = 10_000


class FilterBankError(Exception):
    pass


@dataclass(frozen=True)
class CandidateLF:
    lf_id: str
    explanation_id: str
    lf: LogicalForm
    signature: tuple[int, ...] = ()

    def sort_key(self) -> tuple:
        return (self.lf.sort_key(), self.lf_id)


@dataclass
class FilterReport:
    candidates_in: int = 0
    discarded_semantic: int = 0
    discarded_pragmatic: int = 0
    survivors: int = 0
    discarded_constant: int = 0
    discarded_duplicate: int = 0
    discarded_dominated: int = 0
    signature_pool_size: int = 0
    signature_subsampled: bool = False
    verdicts: dict[str, str] = field(default_factory=dict)

    def check_identity(self) -> None:
        if self.candidates_in != self.discarded_semantic + self.discarded_pragmatic + self.survivors:
            raise FilterBankError(
                f"filter report does not reconcile: {self.candidates_in} != "
                f"{self.discarded_semantic} + {self.discarded_pragmatic} + {self.survivors}"
            )
        if self.discarded_pragmatic != (
            self.discarded_constant + self.discarded_duplicate + self.discarded_dominated
        ):
            raise FilterBankError("pragmatic subtotals do not reconcile")

    def to_dict(self) -> dict:
        return {
            "candidates_in": self.candidates_in,
            "discarded_semantic": self.discarded_semantic,
            "discarded_pragmatic": self.discarded_pragmatic,
            "survivors": self.survivors,
            "discarded_constant": self.discarded_constant,
            "discarded_duplicate": self.discarded_duplicate,
            "discarded_dominated": self.discarded_dominated,
            "signature_pool_size": self.signature_pool_size,
            "signature_subsampled": self.signature_subsampled,
            "verdicts": dict(sorted(self.verdicts.items())),
        }

    def table(self) -> str:
        """Small text table of pre-filter, discarded, and post-filter counts."""
        lines = [
            f"{'':<12}{'Pre-filters':>12}{'Sem.':>8}{'Prag.':>8}{'Post-filters':>14}",
            f"{'LFs':<12}{self.candidates_in:>12}{self.discarded_semantic:>8}"
            f"{self.discarded_pragmatic:>8}{self.survivors:>14}",
        ]
        return "\n".join(lines)


def semantic_filter(
    candidates: Sequence[LogicalForm], example: Example, label: int
) -> tuple[list[LogicalForm], list[LogicalForm]]:
    """Partition candidates into (kept, discarded): kept iff the candidate
    labels the explanation's own example exactly as the annotator did."""
    ctx = EvalContext.from_example(example)
    kept, discarded = [], []
    for lf in candidates:
        (kept if execute_on_context(lf, ctx) == label else discarded).append(lf)
    return kept, discarded


def compute_signatures(lfs: Sequence[LogicalForm], pool: Sequence[Example]) -> list[tuple[int, ...]]:
    contexts = [EvalContext.from_example(ex) for ex in pool]
    out = []
    for lf in lfs:
        out.append(tuple(execute_on_context(lf, ctx) for ctx in contexts))
    return out


def constant_filter(
    signatures: Mapping[str, tuple[int, ...]],
) -> tuple[list[str], list[str]]:
    """Partition lf ids into (kept, discarded-as-constant)."""
    kept, discarded = [], []
    for lf_id, sig in signatures.items():
        if len(set(sig)) <= 1:
            discarded.append(lf_id)
        else:
            kept.append(lf_id)
    return kept, discarded


def duplicate_filter(
    candidates: Sequence[CandidateLF],
) -> tuple[list[CandidateLF], list[tuple[CandidateLF, str]]]:
    """Group by identical signature; keep one representative per group.
    Returns (kept, [(discarded, kept_id), ...])."""
    groups: dict[tuple[int, ...], list[CandidateLF]] = {}
    for c in candidates:
        groups.setdefault(c.signature, []).append(c)
    kept: list[CandidateLF] = []
    discarded: list[tuple[CandidateLF, str]] = []
    for sig in sorted(groups, key=lambda s: tuple(s)):
        members = sorted(groups[sig], key=lambda c: (c.lf.size, lf_to_sexpr(c.lf), c.lf_id))
        rep = members[0]
        kept.append(rep)
        for other in members[1:]:
            discarded.append((other, rep.lf_id))
    return kept, discarded


def most_specific_per_explanation(
    candidates: Sequence[CandidateLF],
) -> tuple[list[CandidateLF], list[tuple[CandidateLF, str]]]:
    """Keep the minimum-coverage candidate per explanation; ties broken by
    fewer skipped tokens, smaller derivation, then canonical order."""
    groups: dict[str, list[CandidateLF]] = {}
    for c in candidates:
        groups.setdefault(c.explanation_id, []).append(c)
    kept: list[CandidateLF] = []
    discarded: list[tuple[CandidateLF, str]] = []
    for expl_id in sorted(groups):
        members = sorted(
            groups[expl_id],
            key=lambda c: (coverage(c.signature), c.lf.skipped, c.lf.size, lf_to_sexpr(c.lf), c.lf_id),
        )
        winner = members[0]
        kept.append(winner)
        for other in members[1:]:
            discarded.append((other, winner.lf_id))
    return kept, discarded


def run_filter_bank(
    candidates_by_explanation: Mapping[str, Sequence[LogicalForm]],
    dataset: Dataset,
    *,
    signature_seed: int = 0,
) -> tuple[list[CandidateLF], FilterReport]:
    """Apply semantic -> constant -> duplicate -> most-specific and report."""
    report = FilterReport()
    examples_by_expl = {expl.id: ex for ex, expl in dataset.labeled_subset}
    labels_by_expl = {expl.id: expl.label for _, expl in dataset.labeled_subset}

    pool = list(dataset.unlabeled_pool)
    if len(pool) > SIGNATURE_SAMPLE_CAP:
        import random

        rng = random.Random(signature_seed)
        pool = rng.sample(pool, SIGNATURE_SAMPLE_CAP)
        report.signature_subsampled = True
    report.signature_pool_size = len(pool)

    semantic_survivors: list[CandidateLF] = []
    for expl_id in sorted(candidates_by_explanation):
        cands = candidates_by_explanation[expl_id]
        report.candidates_in += len(cands)
        if expl_id not in examples_by_expl:
            raise FilterBankError(f"no labeled example for explanation {expl_id!r}")
        ordered = sorted(cands, key=lambda lf: lf.sort_key())
        kept, discarded = semantic_filter(ordered, examples_by_expl[expl_id], labels_by_expl[expl_id])
        for k, lf in enumerate(ordered):
            lf_id = f"{expl_id}#{k}"
            if lf in kept:
                semantic_survivors.append(CandidateLF(lf_id, expl_id, lf))
            else:
                report.verdicts[lf_id] = "semantic_fail"
                report.discarded_semantic += 1

    sigs = compute_signatures([c.lf for c in semantic_survivors], pool)
    with_sigs = [
        CandidateLF(c.lf_id, c.explanation_id, c.lf, sig)
        for c, sig in zip(semantic_survivors, sigs)
    ]

    kept_ids, const_ids = constant_filter({c.lf_id: c.signature for c in with_sigs})
    kept_ids_set = set(kept_ids)
    non_constant = []
    for c in with_sigs:
        if c.lf_id in kept_ids_set:
            non_constant.append(c)
        else:
            report.verdicts[c.lf_id] = "constant"
            report.discarded_constant += 1

    unique, dup_discards = duplicate_filter(non_constant)
    for c, rep_id in dup_discards:
        report.verdicts[c.lf_id] = f"redundant_duplicate_of {rep_id}"
        report.discarded_duplicate += 1

    final, dom_discards = most_specific_per_explanation(unique)
    for c, winner_id in dom_discards:
        report.verdicts[c.lf_id] = f"dominated_by {winner_id}"
        report.discarded_dominated += 1

    final = sorted(final, key=lambda c: c.lf_id)
    for c in final:
        report.verdicts[c.lf_id] = "kept"
    report.survivors = len(final)
    report.discarded_pragmatic = (
        report.discarded_constant + report.discarded_duplicate + report.discarded_dominated
    )
    report.check_identity()
    return final, report
