"""Execute logical forms against examples.

Semantics fixed here (informal phrasings get one executable meaning):

- A region is a sorted tuple of token positions; ``between`` is the span
  strictly between the two entity spans (order-insensitive, empty when the
  spans are adjacent), ``left``/``right`` are everything before/after a
  region, optionally truncated to a word or character window.
- ``word_distance`` counts tokens strictly between two regions (0 when
  adjacent, via the minimum gap over token pairs for scattered regions);
  ``character_distance`` counts characters between region boundaries with
  the sentence rendered as single-space-joined tokens. Both are symmetric.
- "within k words/characters" means distance strictly less than k (the
  match starts at one of the k nearest positions); character windows keep
  whole tokens whose gap to the anchor is below k.
- Substring-style matching (contains/substring/starts_with/ends_with) is
  case-insensitive; case predicates see the original surface form, with
  ``upper`` a synonym of ``all_caps``.
- Entity-tag predicates test the corpus ``entity_tags`` over token regions;
  counting is per token.
- Comparisons coerce strings to numbers when possible; a non-numeric side
  makes an order comparison false, while eq/ne fall back to string equality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import Example
from .lf import (
    CASE_OPS,
    CMP_OPS,
    STRING_OPS,
    TAG_OPS,
    Expr,
    LfError,
    LogicalForm,
    boolean,
    infer_type,
    integer,
    string,
    to_sexpr,
)

__all__ = [
    "EvalContext",
    "ExecutionError",
    "execute",
    "evaluate",
    "signature",
    "coverage",
    "perturb",
]

Region = tuple[int, ...]


class ExecutionError(LfError):
    """A logical form could not be executed (bad types or values)."""


@dataclass
class EvalContext:
    """Precomputed per-example views used by the evaluator."""

    example: Example
    tokens: tuple[str, ...]
    lower: tuple[str, ...]
    tags: tuple[str, ...]
    char_start: tuple[int, ...]
    char_end: tuple[int, ...]
    x_region: Region
    y_region: Region
    all_region: Region

    @classmethod
    def from_example(cls, ex: Example) -> "EvalContext":
        starts, ends = [], []
        pos = 0
        for tok in ex.tokens:
            starts.append(pos)
            pos += len(tok)
            ends.append(pos)
            pos += 1  # single joining space
        return cls(
            example=ex,
            tokens=ex.tokens,
            lower=tuple(t.lower() for t in ex.tokens),
            tags=ex.entity_tags,
            char_start=tuple(starts),
            char_end=tuple(ends),
            x_region=tuple(range(*ex.span_x)),
            y_region=tuple(range(*ex.span_y)),
            all_region=tuple(range(len(ex.tokens))),
        )

    def region_text(self, region: Region, lower: bool) -> str:
        """Join the region's tokens; non-adjacent runs are separated by a
        newline so substrings never match across a gap."""
        src = self.lower if lower else self.tokens
        parts: list[str] = []
        prev = None
        for i in region:
            if prev is not None:
                parts.append(" " if i == prev + 1 else "\n")
            parts.append(src[i])
            prev = i
        return "".join(parts)


def word_gap(a: Region, b: Region) -> float:
    """Tokens strictly between the regions; 0 if they touch, inf if either is empty."""
    if not a or not b:
        return math.inf
    if set(a) & set(b):
        return 0
    best = math.inf
    for i in a:
        for j in b:
            best = min(best, abs(i - j) - 1)
    return max(best, 0)


def char_gap(ctx: EvalContext, a: Region, b: Region) -> float:
    if not a or not b:
        return math.inf
    if set(a) & set(b):
        return 0
    best = math.inf
    for i in a:
        for j in b:
            if i < j:
                gap = ctx.char_start[j] - ctx.char_end[i]
            else:
                gap = ctx.char_start[i] - ctx.char_end[j]
            best = min(best, gap)
    return max(best, 0)


def _as_text(ctx: EvalContext, v, lower: bool) -> str:
    if isinstance(v, str):
        return v.lower() if lower else v
    if isinstance(v, tuple):  # region
        return ctx.region_text(v, lower)
    raise ExecutionError(f"expected text-like value, got {type(v).__name__}")


def _as_number(ctx: EvalContext, v) -> float:
    if isinstance(v, bool):
        raise ExecutionError("boolean in numeric position")
    if isinstance(v, (int, float)):
        return float(v)
    text = _as_text(ctx, v, lower=True).strip()
    try:
        return float(text)
    except ValueError:
        return math.nan


def _needles(ctx: EvalContext, v) -> list[str]:
    if isinstance(v, list):  # collection value
        return [s.lower() for s in v]
    return [_as_text(ctx, v, lower=True)]


def _occurs(needle: str, hay: str) -> bool:
    return bool(needle) and needle in hay


def _token_passes(ctx: EvalContext, idx: int, test: Expr) -> bool:
    op = test.op
    surface = ctx.tokens[idx]
    low = ctx.lower[idx]
    if op in TAG_OPS:
        return ctx.tags[idx] == op
    if op == "lower":
        return surface.islower()
    if op in ("upper", "all_caps"):
        return surface.isupper()
    if op == "capital":
        return bool(surface) and surface[0].isupper()
    if op in STRING_OPS:
        arg = _as_text(ctx, _eval(test.args[0], ctx), lower=True)
        if not arg:
            return False
        if op == "starts_with":
            return low.startswith(arg)
        if op == "ends_with":
            return low.endswith(arg)
        return arg in low
    raise ExecutionError(f"bad token test {op!r}")


def _window(ctx: EvalContext, base: Region, anchor: Region, k: int, unit: str) -> Region:
    if k <= 0:
        return ()
    if unit == "words":
        out = [i for i in base if word_gap((i,), anchor) < k]
    else:
        out = [i for i in base if char_gap(ctx, (i,), anchor) < k]
    return tuple(out)


def _eval(e: Expr, ctx: EvalContext):
    op = e.op
    if op == "bool":
        return e.value
    if op in ("int", "float"):
        return e.value
    if op == "str":
        return e.value
    if op == "arg_x":
        return ctx.x_region
    if op == "arg_y":
        return ctx.y_region
    if op == "sentence":
        return ctx.all_region
    if op == "alias":
        return list(e.value[1])

    if op == "and":
        return all(_eval(a, ctx) for a in e.args)
    if op == "or":
        return any(_eval(a, ctx) for a in e.args)
    if op == "not":
        return not _eval(e.args[0], ctx)
    if op in ("any", "all", "none"):
        if len(e.args) == 1 and infer_type(e.args[0]) == "blist":
            vals = _eval(e.args[0], ctx)
        else:
            vals = [_eval(a, ctx) for a in e.args]
        if op == "any":
            return any(vals)
        if op == "all":
            return all(vals)
        return not any(vals)
    if op == "set" and infer_type(e) == "bool":
        return all(_eval(a, ctx) for a in e.args)

    if op in ("list", "set"):
        out: list[str] = []
        for a in e.args:
            v = _eval(a, ctx)
            out.append(_as_text(ctx, v, lower=False))
        if op == "set":
            seen, uniq = set(), []
            for s in out:
                if s.lower() not in seen:
                    seen.add(s.lower())
                    uniq.append(s)
            return uniq
        return out

    if op in CMP_OPS:
        a = _eval(e.args[0], ctx)
        b = _eval(e.args[1], ctx)
        na, nb = _as_number(ctx, a), _as_number(ctx, b)
        if math.isnan(na) or math.isnan(nb):
            if op in ("eq", "ne"):
                sa = _as_text(ctx, a, lower=True) if not isinstance(a, (int, float)) else str(a)
                sb = _as_text(ctx, b, lower=True) if not isinstance(b, (int, float)) else str(b)
                return (sa == sb) if op == "eq" else (sa != sb)
            return False
        if op == "eq":
            return na == nb
        if op == "ne":
            return na != nb
        if op == "lt":
            return na < nb
        if op == "le":
            return na <= nb
        if op == "gt":
            return na > nb
        return na >= nb

    if op in CASE_OPS:
        text = _as_text(ctx, _eval(e.args[0], ctx), lower=False)
        if op == "lower":
            return text.islower()
        if op in ("upper", "all_caps"):
            return text.isupper()
        return bool(text) and text[0].isupper()

    if op in STRING_OPS and len(e.args) == 2:
        a = _as_text(ctx, _eval(e.args[0], ctx), lower=True)
        b = _as_text(ctx, _eval(e.args[1], ctx), lower=True)
        if not b:
            return False
        if op == "starts_with":
            return a.startswith(b)
        if op == "ends_with":
            return a.endswith(b)
        return b in a

    if op in TAG_OPS:
        region = _eval(e.args[0], ctx)
        return any(ctx.tags[i] == op for i in region)

    if op == "count":
        if len(e.args) == 1:
            v = _eval(e.args[0], ctx)
            return len(v)
        needle = _as_text(ctx, _eval(e.args[0], ctx), lower=True)
        hay = ctx.region_text(_eval(e.args[1], ctx), lower=True)
        if not needle:
            return 0
        return hay.count(needle)

    if op == "contains":
        container = _eval(e.args[0], ctx)
        needle_val = _eval(e.args[1], ctx)
        mode = e.value
        if isinstance(needle_val, tuple) and isinstance(container, tuple):
            # region needle inside region container: overlap test
            hit = bool(set(container) & set(needle_val))
            if mode == "none":
                return not hit
            return hit
        hay = _as_text(ctx, container, lower=True)
        needles = _needles(ctx, needle_val)
        hits = [_occurs(nd, hay) for nd in needles]
        if mode == "any":
            return any(hits)
        if mode == "all":
            return bool(hits) and all(hits)
        return not any(hits)

    if op == "intersection":
        coll = _eval(e.args[0], ctx)
        other = _eval(e.args[1], ctx)
        if isinstance(other, tuple):
            hay = ctx.region_text(other, lower=True)
            present = [s for s in coll if _occurs(s.lower(), hay)]
        else:
            lows = {s.lower() for s in other}
            present = [s for s in coll if s.lower() in lows]
        seen, uniq = set(), []
        for s in present:
            if s.lower() not in seen:
                seen.add(s.lower())
                uniq.append(s)
        return uniq

    if op == "map":
        test = e.args[0]
        target = _eval(e.args[1], ctx)
        if isinstance(target, tuple):
            return [_token_passes(ctx, i, test) for i in target]
        out = []
        for s in target:
            low = s.lower()
            arg = _as_text(ctx, _eval(test.args[0], ctx), lower=True) if test.args else None
            if test.op == "starts_with":
                out.append(bool(arg) and low.startswith(arg))
            elif test.op == "ends_with":
                out.append(bool(arg) and low.endswith(arg))
            elif test.op == "substring":
                out.append(bool(arg) and arg in low)
            elif test.op == "lower":
                out.append(s.islower())
            elif test.op in ("upper", "all_caps"):
                out.append(s.isupper())
            elif test.op == "capital":
                out.append(bool(s) and s[0].isupper())
            else:
                out.append(False)
        return out

    if op == "filter":
        region = _eval(e.args[0], ctx)
        test = e.args[1]
        return tuple(i for i in region if _token_passes(ctx, i, test))

    if op == "word_distance":
        g = word_gap(_eval(e.args[0], ctx), _eval(e.args[1], ctx))
        return g
    if op == "character_distance":
        return char_gap(ctx, _eval(e.args[0], ctx), _eval(e.args[1], ctx))

    if op in ("left", "right"):
        if len(e.args) == 2 and e.value is None:
            a = _eval(e.args[0], ctx)
            b = _eval(e.args[1], ctx)
            if not a or not b:
                return False
            if op == "left":
                return max(a) < min(b)
            return min(a) > max(b)
        anchor = _eval(e.args[0], ctx)
        if not anchor:
            return ()
        if op == "left":
            base = tuple(i for i in ctx.all_region if i < min(anchor))
        else:
            base = tuple(i for i in ctx.all_region if i > max(anchor))
        if len(e.args) == 1:
            return base
        k = _eval(e.args[1], ctx)
        return _window(ctx, base, anchor, int(k), e.value)

    if op == "between":
        a = _eval(e.args[0], ctx)
        b = _eval(e.args[1], ctx)
        if not a or not b:
            return ()
        lo_end = min(max(a), max(b))
        hi_start = max(min(a), min(b))
        return tuple(i for i in ctx.all_region if lo_end < i < hi_start)

    if op == "within":
        a = _eval(e.args[0], ctx)
        b = _eval(e.args[1], ctx)
        k = _eval(e.args[2], ctx)
        if e.value == "words":
            return word_gap(a, b) < k
        return char_gap(ctx, a, b) < k

    raise ExecutionError(f"cannot evaluate op {e.op!r}")


def evaluate(e: Expr, ctx: EvalContext):
    """Evaluate any well-typed expression; raises ExecutionError otherwise."""
    try:
        infer_type(e)
    except LfError as exc:
        raise ExecutionError(str(exc)) from exc
    return _eval(e, ctx)


def execute(lf: LogicalForm, example: Example) -> int:
    """Run one labeling function: its polarity if the condition holds, else 0."""
    try:
        if infer_type(lf.condition) != "bool":
            raise ExecutionError("condition is not boolean")
    except LfError as exc:
        raise ExecutionError(str(exc)) from exc
    ctx = EvalContext.from_example(example)
    return lf.polarity if _eval(lf.condition, ctx) else 0


def execute_on_context(lf: LogicalForm, ctx: EvalContext) -> int:
    return lf.polarity if _eval(lf.condition, ctx) else 0


def signature(lf: LogicalForm, examples: Sequence[Example]) -> tuple[int, ...]:
    """The LF's label on every example, in corpus order."""
    infer_type(lf.condition)
    out = []
    for ex in examples:
        ctx = EvalContext.from_example(ex)
        out.append(lf.polarity if _eval(lf.condition, ctx) else 0)
    return tuple(out)


def coverage(sig: Sequence[int]) -> float:
    """Fraction of non-abstain labels; 0.0 for an empty signature."""
    if not len(sig):
        return 0.0
    return sum(1 for v in sig if v != 0) / len(sig)


# ---------------------------------------------------------------------------
# single-node perturbations
# ---------------------------------------------------------------------------

_SWAP_FAMILIES = [
    ("and", "or"),
    ("any", "all", "none"),
    ("eq", "ne", "lt", "le", "gt", "ge"),
    ("lower", "upper", "capital", "all_caps"),
    ("starts_with", "ends_with", "substring"),
    ("person", "location", "date", "number", "organization"),
    ("word_distance", "character_distance"),
    ("left", "right"),
    ("list", "set"),
]
_SWAP_FOR = {op: fam for fam in _SWAP_FAMILIES for op in fam}


def _iter_strings(e: Expr) -> list[str]:
    out = []
    if e.op == "str":
        out.append(e.value)
    for a in e.args:
        out.extend(_iter_strings(a))
    return out


def _node_edits(e: Expr, pool: Sequence[str]) -> list[Expr]:
    """All single-node replacements for the root of ``e``."""
    out: list[Expr] = []
    fam = _SWAP_FOR.get(e.op)
    if fam:
        for other in fam:
            if other != e.op:
                out.append(Expr(other, e.args, e.value))
    if e.op == "contains":
        for mode in ("any", "all", "none"):
            if mode != e.value:
                out.append(Expr(e.op, e.args, mode))
    if e.op == "within" or (e.op in ("left", "right") and e.value is not None):
        other = "chars" if e.value == "words" else "words"
        out.append(Expr(e.op, e.args, other))
    if e.op == "int":
        out.append(integer(e.value + 1))
        if e.value >= 1:
            out.append(integer(e.value - 1))
    if e.op == "bool":
        out.append(boolean(not e.value))
    if e.op == "str":
        for s in pool:
            if s != e.value:
                out.append(string(s))
    return out


def _rebuild(e: Expr, path: tuple[int, ...], replacement: Expr) -> Expr:
    if not path:
        return replacement
    i = path[0]
    args = list(e.args)
    args[i] = _rebuild(args[i], path[1:], replacement)
    return Expr(e.op, tuple(args), e.value)


def _walk(e: Expr, path: tuple[int, ...] = ()):
    yield path, e
    for i, a in enumerate(e.args):
        yield from _walk(a, path + (i,))


def perturb(lf: LogicalForm, grammar=None, budget: int = 10) -> list[LogicalForm]:
    """Up to ``budget`` well-typed variants differing from ``lf`` in exactly
    one node: a predicate swapped within its family, an integer nudged by one,
    a comparison operator replaced, or a string literal swapped with another
    literal from the same form. Deterministic enumeration order."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    pool = sorted(set(_iter_strings(lf.condition)))
    seen = {lf.condition}
    out: list[LogicalForm] = []
    for path, node in _walk(lf.condition):
        for repl in _node_edits(node, pool):
            cand = _rebuild(lf.condition, path, repl)
            if cand in seen:
                continue
            seen.add(cand)
            try:
                if infer_type(cand) != "bool":
                    continue
            except LfError:
                continue
            out.append(LogicalForm(lf.polarity, cand, lf.skipped, lf.size))
            if len(out) >= budget:
                return out
    return out
