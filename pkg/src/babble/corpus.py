"""Data model and ingestion: examples, explanations, aliases, datasets.

Inputs arrive pre-tokenized and pre-tagged; this package performs no
linguistic preprocessing. Files are JSON Lines (one record per line) except
the alias file, which is a single JSON object.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

__all__ = [
    "Example",
    "Explanation",
    "Dataset",
    "CorpusError",
    "VALID_TAGS",
    "load_examples",
    "load_explanations",
    "load_aliases",
    "save_examples",
    "save_explanations",
    "example_to_record",
    "explanation_to_record",
]

VALID_TAGS = frozenset({"person", "location", "date", "number", "organization", "none"})


class CorpusError(Exception):
    """Raised for malformed corpus files or invalid records."""


@dataclass(frozen=True)
class Example:
    """One candidate relation mention: a tokenized sentence with two entity
    spans. ``gold_label`` on pool examples is evaluation-only and must not be
    read by pipeline stages."""

    id: str
    tokens: tuple[str, ...]
    entity_tags: tuple[str, ...]
    span_x: tuple[int, int]
    span_y: tuple[int, int]
    gold_label: Optional[int] = None
    features: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        n = len(self.tokens)
        if len(self.entity_tags) != n:
            raise CorpusError(f"example {self.id}: {len(self.entity_tags)} tags for {n} tokens")
        bad = set(self.entity_tags) - VALID_TAGS
        if bad:
            raise CorpusError(f"example {self.id}: unknown entity tags {sorted(bad)}")
        for name, (s, e) in (("span_x", self.span_x), ("span_y", self.span_y)):
            if not (0 <= s < e <= n):
                if s == e:
                    raise CorpusError(f"example {self.id}: empty span {name}={s, e}")
                raise CorpusError(f"example {self.id}: {name}={s, e} out of range for {n} tokens")
        ax, bx = self.span_x
        ay, by = self.span_y
        if max(ax, ay) < min(bx, by):
            raise CorpusError(f"example {self.id}: spans overlap")
        if self.gold_label is not None and self.gold_label not in (-1, 1):
            raise CorpusError(f"example {self.id}: gold_label must be -1/+1")

    @property
    def x_text(self) -> str:
        return " ".join(self.tokens[self.span_x[0] : self.span_x[1]])

    @property
    def y_text(self) -> str:
        return " ".join(self.tokens[self.span_y[0] : self.span_y[1]])


@dataclass(frozen=True)
class Explanation:
    """An annotator's label for one example plus the sentence justifying it."""

    id: str
    example_id: str
    label: int
    text: str

    def __post_init__(self) -> None:
        if self.label not in (-1, 1):
            raise CorpusError(f"explanation {self.id}: label must be -1/+1, got {self.label}")
        if not self.text.strip():
            raise CorpusError(f"explanation {self.id}: empty text")


@dataclass(frozen=True)
class Dataset:
    """Labeled subset with explanations, the unlabeled pool, and eval splits."""

    labeled_subset: tuple[tuple[Example, Explanation], ...]
    unlabeled_pool: tuple[Example, ...]
    dev: tuple[Example, ...] = ()
    test: tuple[Example, ...] = ()
    aliases: Mapping[str, frozenset[str]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for ex, expl in self.labeled_subset:
            if expl.example_id != ex.id:
                raise CorpusError(f"explanation {expl.id} bound to {expl.example_id}, paired with {ex.id}")
        for split_name, split in (("dev", self.dev), ("test", self.test)):
            for ex in split:
                if ex.gold_label is None:
                    raise CorpusError(f"{split_name} example {ex.id} lacks gold_label")

    @property
    def explanations(self) -> tuple[Explanation, ...]:
        return tuple(expl for _, expl in self.labeled_subset)

    def example_for(self, explanation_id: str) -> Example:
        for ex, expl in self.labeled_subset:
            if expl.id == explanation_id:
                return ex
        raise KeyError(explanation_id)


def _coerce_label(raw, where: str) -> int:
    if isinstance(raw, bool):
        return 1 if raw else -1
    if raw in (-1, 1):
        return int(raw)
    raise CorpusError(f"{where}: label must be true/false (or -1/+1), got {raw!r}")


def _span(raw, where: str) -> tuple[int, int]:
    if (
        not isinstance(raw, (list, tuple))
        or len(raw) != 2
        or not all(isinstance(v, int) and not isinstance(v, bool) for v in raw)
    ):
        raise CorpusError(f"{where}: span must be a two-element integer array, got {raw!r}")
    return (raw[0], raw[1])


def _iter_jsonl(path: str | Path):
    p = Path(path)
    if not p.exists():
        raise CorpusError(f"no such file: {p}")
    with p.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{p}:{lineno}: malformed JSON ({exc.msg})") from exc
            if not isinstance(rec, dict):
                raise CorpusError(f"{p}:{lineno}: record must be an object")
            yield lineno, rec


def load_examples(path: str | Path) -> list[Example]:
    """Load examples from JSON Lines; ids must be unique, order preserved."""
    out: list[Example] = []
    seen: set[str] = set()
    for lineno, rec in _iter_jsonl(path):
        where = f"{path}:{lineno}"
        try:
            ex_id = rec["id"]
            tokens = rec["tokens"]
            tags = rec["entity_tags"]
        except KeyError as exc:
            raise CorpusError(f"{where}: missing field {exc.args[0]!r}") from None
        if not isinstance(ex_id, str) or not ex_id:
            raise CorpusError(f"{where}: id must be a non-empty string")
        if ex_id in seen:
            raise CorpusError(f"{where}: duplicate id {ex_id!r}")
        seen.add(ex_id)
        if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
            raise CorpusError(f"{where}: tokens must be an array of strings")
        if not isinstance(tags, list) or not all(isinstance(t, str) for t in tags):
            raise CorpusError(f"{where}: entity_tags must be an array of strings")
        gold = rec.get("gold_label")
        feats = rec.get("features", [])
        if not isinstance(feats, list) or not all(isinstance(f, str) for f in feats):
            raise CorpusError(f"{where}: features must be an array of strings")
        try:
            out.append(
                Example(
                    id=ex_id,
                    tokens=tuple(tokens),
                    entity_tags=tuple(tags),
                    span_x=_span(rec.get("span_x"), f"{where}: span_x"),
                    span_y=_span(rec.get("span_y"), f"{where}: span_y"),
                    gold_label=None if gold is None else _coerce_label(gold, where),
                    features=tuple(feats),
                )
            )
        except CorpusError as exc:
            raise CorpusError(f"{where}: {exc}") from None
    return out


def load_explanations(path: str | Path, examples: Mapping[str, Example]) -> list[Explanation]:
    """Load explanations; every record must reference a known example id."""
    out: list[Explanation] = []
    seen: set[str] = set()
    for lineno, rec in _iter_jsonl(path):
        where = f"{path}:{lineno}"
        for key in ("id", "example_id", "label", "text"):
            if key not in rec:
                raise CorpusError(f"{where}: missing field {key!r}")
        if rec["id"] in seen:
            raise CorpusError(f"{where}: duplicate id {rec['id']!r}")
        seen.add(rec["id"])
        if rec["example_id"] not in examples:
            raise CorpusError(f"{where}: unknown example_id {rec['example_id']!r}")
        if not isinstance(rec["text"], str):
            raise CorpusError(f"{where}: text must be a string")
        try:
            out.append(
                Explanation(
                    id=rec["id"],
                    example_id=rec["example_id"],
                    label=_coerce_label(rec["label"], where),
                    text=rec["text"],
                )
            )
        except CorpusError as exc:
            raise CorpusError(f"{where}: {exc}") from None
    return out


def load_aliases(path: str | Path) -> dict[str, frozenset[str]]:
    """Load the alias file: one JSON object mapping name -> array of strings."""
    p = Path(path)
    if not p.exists():
        raise CorpusError(f"no such file: {p}")
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorpusError(f"{p}: malformed JSON ({exc.msg})") from exc
    if not isinstance(raw, dict):
        raise CorpusError(f"{p}: alias file must be a JSON object")
    out: dict[str, frozenset[str]] = {}
    for name, words in raw.items():
        if not isinstance(name, str) or not name or " " in name:
            raise CorpusError(f"{p}: alias names must be single tokens, got {name!r}")
        if not isinstance(words, list) or not words or not all(isinstance(w, str) for w in words):
            raise CorpusError(f"{p}: alias {name!r} must map to a non-empty array of strings")
        out[name.lower()] = frozenset(w.lower() for w in words)
    return out


def example_to_record(ex: Example) -> dict:
    rec = {
        "id": ex.id,
        "tokens": list(ex.tokens),
        "entity_tags": list(ex.entity_tags),
        "span_x": list(ex.span_x),
        "span_y": list(ex.span_y),
    }
    if ex.gold_label is not None:
        rec["gold_label"] = ex.gold_label > 0
    if ex.features:
        rec["features"] = list(ex.features)
    return rec


def explanation_to_record(expl: Explanation) -> dict:
    return {
        "id": expl.id,
        "example_id": expl.example_id,
        "label": expl.label > 0,
        "text": expl.text,
    }


def save_examples(path: str | Path, examples: Iterable[Example]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(example_to_record(ex), ensure_ascii=False) + "\n")


def save_explanations(path: str | Path, explanations: Iterable[Explanation]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for expl in explanations:
            fh.write(json.dumps(explanation_to_record(expl), ensure_ascii=False) + "\n")
