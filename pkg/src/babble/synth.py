"""Deterministic synthetic corpus generator.

Sentences are filler words around two single-token person entities. Cue
phrases are planted strictly between the entities with configurable
probabilities per class, so explanations of the form
'Label true because "<cue>" is between person 1 and person 2.' hold by
construction. Held-out cues correlate with the label but are never
explained, which leaves their examples to the discriminative model.

The generator is a pure function of (spec, seed). Gold labels on pool
examples are evaluation-only; the declared noise rate flips pool/dev/test
gold labels after cue planting, while the labeled subset stays clean (an
annotator labels their own example correctly).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import Dataset, Example, Explanation

__all__ = ["Cue", "SynthSpec", "synth_corpus", "SynthError"]


class SynthError(Exception):
    pass


@dataclass(frozen=True)
class Cue:
    """A phrase planted between the entities: with probability ``p_match`` in
    examples of its class, ``p_other`` in the other class."""

    phrase: str
    p_match: float = 0.9
    p_other: float = 0.05

    def __post_init__(self) -> None:
        if not self.phrase:
            raise SynthError("cue phrase must be non-empty")
        for p in (self.p_match, self.p_other):
            if not 0.0 <= p <= 1.0:
                raise SynthError(f"cue probability {p} outside [0, 1]")


@dataclass(frozen=True)
class SynthSpec:
    n_pool: int = 1000
    n_dev: int = 150
    n_test: int = 300
    vocab_size: int = 40
    pos_cues: tuple[Cue, ...] = (Cue("wed"),)
    neg_cues: tuple[Cue, ...] = (Cue("sued"),)
    heldout_pos_cues: tuple[Cue, ...] = ()
    noise: float = 0.0
    pos_rate: float = 0.5
    swap_prob: float = 0.0  # probability that Y precedes X in the sentence
    min_fill: int = 1
    max_fill: int = 3

    def __post_init__(self) -> None:
        if not 0.0 <= self.noise < 0.5:
            raise SynthError(f"noise rate {self.noise} outside [0, 0.5)")
        if not 0.0 < self.pos_rate < 1.0:
            raise SynthError("pos_rate must be in (0, 1)")
        if self.vocab_size < 2:
            raise SynthError("vocab_size must be >= 2")
        if self.min_fill < 1 or self.max_fill < self.min_fill:
            raise SynthError("fill bounds must satisfy 1 <= min <= max")


def _fillers(rng: np.random.Generator, spec: SynthSpec, lo: int, hi: int) -> list[str]:
    k = int(rng.integers(lo, hi + 1))
    return [f"w{int(i):02d}" for i in rng.integers(0, spec.vocab_size, size=k)]


def _make_example(
    rng: np.random.Generator, spec: SynthSpec, ex_id: str, y: int, forced_cue: str | None = None
) -> Example:
    cues: list[str] = []
    for cue in spec.pos_cues:
        p = cue.p_match if y == 1 else cue.p_other
        if rng.random() < p:
            cues.append(cue.phrase)
    for cue in spec.neg_cues:
        p = cue.p_match if y == -1 else cue.p_other
        if rng.random() < p:
            cues.append(cue.phrase)
    for cue in spec.heldout_pos_cues:
        p = cue.p_match if y == 1 else cue.p_other
        if rng.random() < p:
            cues.append(cue.phrase)
    if forced_cue is not None and forced_cue not in cues:
        cues.append(forced_cue)

    first_name = f"Ann{int(rng.integers(0, 20)):02d}"
    second_name = f"Bob{int(rng.integers(0, 20)):02d}"
    pre = _fillers(rng, spec, 0, spec.max_fill)
    post = _fillers(rng, spec, 0, spec.max_fill)
    mid = _fillers(rng, spec, spec.min_fill, spec.max_fill)
    # plant each cue at a deterministic-random slot strictly between entities
    for phrase in cues:
        slot = int(rng.integers(0, len(mid) + 1))
        mid = mid[:slot] + phrase.split() + mid[slot:]

    tokens = pre + [first_name] + mid + [second_name] + post
    first_span = (len(pre), len(pre) + 1)
    second_span = (len(pre) + 1 + len(mid), len(pre) + 2 + len(mid))
    if rng.random() < spec.swap_prob:
        span_x, span_y = second_span, first_span
    else:
        span_x, span_y = first_span, second_span
    tags = ["none"] * len(tokens)
    tags[first_span[0]] = "person"
    tags[second_span[0]] = "person"
    return Example(
        id=ex_id,
        tokens=tuple(tokens),
        entity_tags=tuple(tags),
        span_x=span_x,
        span_y=span_y,
        gold_label=y,
    )


def _flip(rng: np.random.Generator, spec: SynthSpec, ex: Example) -> Example:
    if spec.noise > 0 and rng.random() < spec.noise:
        return Example(
            id=ex.id,
            tokens=ex.tokens,
            entity_tags=ex.entity_tags,
            span_x=ex.span_x,
            span_y=ex.span_y,
            gold_label=-ex.gold_label,
        )
    return ex


def synth_corpus(spec: SynthSpec, seed: int) -> Dataset:
    """Generate a full Dataset, including one explanation per explained cue."""
    rng = np.random.default_rng(seed)

    def draw_label() -> int:
        return 1 if rng.random() < spec.pos_rate else -1

    def split(prefix: str, count: int) -> tuple[Example, ...]:
        out = []
        for i in range(count):
            ex = _make_example(rng, spec, f"{prefix}-{i:05d}", draw_label())
            out.append(_flip(rng, spec, ex))
        return tuple(out)

    pool = split("pool", spec.n_pool)
    dev = split("dev", spec.n_dev)
    test = split("test", spec.n_test)

    labeled: list[tuple[Example, Explanation]] = []
    k = 0
    for cue in spec.pos_cues:
        ex = _make_example(rng, spec, f"s-{k:03d}", 1, forced_cue=cue.phrase)
        expl = Explanation(
            id=f"expl-{k:03d}",
            example_id=ex.id,
            label=1,
            text=f'Label true because "{cue.phrase}" is between person 1 and person 2.',
        )
        labeled.append((ex, expl))
        k += 1
    for cue in spec.neg_cues:
        ex = _make_example(rng, spec, f"s-{k:03d}", -1, forced_cue=cue.phrase)
        expl = Explanation(
            id=f"expl-{k:03d}",
            example_id=ex.id,
            label=-1,
            text=f'Label false because "{cue.phrase}" is between person 1 and person 2.',
        )
        labeled.append((ex, expl))
        k += 1

    return Dataset(
        labeled_subset=tuple(labeled),
        unlabeled_pool=pool,
        dev=dev,
        test=test,
    )
