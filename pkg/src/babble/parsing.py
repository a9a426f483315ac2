"""Bottom-up chart parsing of explanations into candidate logical forms.

The chart fills spans in increasing length order. Within a span, lexical
rules seed entries, compositional rules combine entries from strictly
smaller spans, and unary rules close the cell to a fixpoint. Matching a
rule may ignore tokens inside the span, up to ``max_skip`` per rule
application; each cell retains at most ``beam`` entries, preferring fewer
skipped tokens, then smaller derivations.

The parser aims for recall: it returns every distinct logical form (merged
by normal form) derivable for the whole explanation, not a single best
parse. Explanations carrying a "label true/false because" prefix parse via
the start rule; a bare condition also parses, taking its polarity from the
annotator's label.
"""

from __future__ import annotations

import re
import time
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .corpus import Explanation
from .grammar import Grammar, Lit, Rule, Sym
from .lf import Expr, LogicalForm, infer_type, integer, normalize, string, to_sexpr

__all__ = [
    "Token",
    "TokenizeError",
    "tokenize_explanation",
    "ChartParser",
    "parse",
    "parse_text",
    "parse_all",
    "ParseAllResult",
]

_PUNCT = set(",.()!?;:")
_DIGITS = re.compile(r"^\d+$")


class TokenizeError(ValueError):
    """Unbalanced quoting in an explanation; carries the character offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


@dataclass(frozen=True)
class Token:
    text: str
    quoted: bool = False


def tokenize_explanation(text: str) -> list[Token]:
    """Split an explanation into tokens. Quoted substrings (single or double
    quotes) become single tokens with quotes stripped and inner case and
    spacing preserved; everything else splits on whitespace and punctuation
    and is lowercased. A trailing quote with nothing after it is dropped;
    any other unbalanced quote is an error naming its offset."""
    if not text.strip():
        raise ValueError("empty explanation text")
    tokens: list[Token] = []
    word: list[str] = []

    def flush_word() -> None:
        if word:
            tokens.append(Token("".join(word).lower()))
            word.clear()

    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c == '"' or (c == "'" and not (word and word[-1].isalnum())):
            # find the matching close quote
            j = text.find(c, i + 1)
            if j == -1:
                if not text[i + 1 :].strip():
                    i += 1  # orphan trailing quote: ignore
                    continue
                raise TokenizeError("unbalanced quote", i)
            flush_word()
            tokens.append(Token(text[i + 1 : j], quoted=True))
            i = j + 1
        elif c.isspace():
            flush_word()
            i += 1
        elif c in _PUNCT:
            flush_word()
            tokens.append(Token(c))
            i += 1
        else:
            word.append(c)
            i += 1
    flush_word()
    return tokens


class Entry:
    """One chart item: a symbol with its semantic value over some span."""

    __slots__ = ("symbol", "sem", "skips", "size", "deriv")

    def __init__(self, symbol: str, sem: object, skips: int, size: int, deriv: object = None):
        self.symbol = symbol
        self.sem = sem
        self.skips = skips
        self.size = size
        self.deriv = deriv

    def __repr__(self) -> str:  # debugging aid
        return f"Entry({self.symbol}, {self.sem!r}, skips={self.skips}, size={self.size})"


def _sem_key(sem) -> tuple:
    if isinstance(sem, Expr):
        return ("E", to_sexpr(sem))
    if isinstance(sem, tuple):
        return ("t",) + tuple(_sem_key(v) for v in sem)
    if sem is None:
        return ("n",)
    return (type(sem).__name__, str(sem))


class _Cell:
    __slots__ = ("by_sym", "count")

    def __init__(self) -> None:
        # symbol -> sem key -> Entry with minimal (skips, size)
        self.by_sym: dict[str, dict[tuple, Entry]] = {}
        self.count = 0

    def add(self, entry: Entry) -> bool:
        bucket = self.by_sym.setdefault(entry.symbol, {})
        key = entry.sem
        old = bucket.get(key)
        if old is None:
            bucket[key] = entry
            self.count += 1
            return True
        if (entry.skips, entry.size) < (old.skips, old.size):
            bucket[key] = entry
            return True
        return False

    def by_symbol(self, symbol: str) -> list[Entry]:
        return list(self.by_sym.get(symbol, {}).values())

    @property
    def entries(self) -> dict[tuple, Entry]:
        return {(s, k): e for s, bucket in self.by_sym.items() for k, e in bucket.items()}

    def prune(self, beam: int | None) -> None:
        if beam is None or self.count <= beam:
            return
        ranked = sorted(
            ((s, k, e) for s, bucket in self.by_sym.items() for k, e in bucket.items()),
            key=lambda ske: (ske[2].skips, ske[2].size, ske[0], _sem_key(ske[1])),
        )
        self.by_sym = {}
        self.count = 0
        for s, k, e in ranked[:beam]:
            self.by_sym.setdefault(s, {})[k] = e
            self.count += 1


class ChartParser:
    """Reusable parser for one grammar."""

    def __init__(self, grammar: Grammar):
        self.grammar = grammar
        self.lexical = [r for r in grammar.rules if r.kind == "lexical"]
        self.unary = [r for r in grammar.rules if r.kind == "unary"]
        self.compositional = [r for r in grammar.rules if r.kind == "compositional"]
        # per rule: literal sequence and first/last item anchors
        self.rule_info: dict[int, tuple] = {}
        for r in grammar.rules:
            lits = tuple(i.text for i in r.rhs if isinstance(i, Lit))
            first, last = r.rhs[0], r.rhs[-1]
            self.rule_info[r.rule_id] = (
                lits,
                isinstance(first, Lit),
                first.text if isinstance(first, Lit) else first.name,
                isinstance(last, Lit),
                last.text if isinstance(last, Lit) else last.name,
            )

    # -- rule matching ----------------------------------------------------

    def _active_rules(self, tokens: Sequence[Token]) -> tuple[list[Rule], list[Rule]]:
        """Drop rules whose literals cannot all be found in this sentence."""
        present = {t.text for t in tokens if not t.quoted}
        lex, comp = [], []
        for rule in self.lexical:
            if all(i.text in present for i in rule.rhs):
                lex.append(rule)
        for rule in self.compositional:
            if all(i.text in present for i in rule.rhs if isinstance(i, Lit)):
                comp.append(rule)
        return lex, comp

    def _can_match(
        self,
        rule: Rule,
        i: int,
        j: int,
        cap: int,
        positions: Mapping[str, list[int]],
        sym_starts: Sequence[set[str]],
        sym_ends: Sequence[set[str]],
    ) -> bool:
        """Cheap rejection: rule literals must embed in order inside the span,
        the first item must start within the skip budget of i, and the last
        must end within the skip budget of j."""
        lits, first_lit, first_name, last_lit, last_name = self.rule_info[rule.rule_id]
        hi = i + cap
        if hi > j - 1:
            hi = j - 1
        if first_lit:
            pos_list = positions.get(first_name)
            if not pos_list:
                return False
            k = bisect_left(pos_list, i)
            if k >= len(pos_list) or pos_list[k] > hi:
                return False
        else:
            for p in range(i, hi + 1):
                if first_name in sym_starts[p]:
                    break
            else:
                return False
        lo = j - 1 - cap
        if lo < i:
            lo = i
        if last_lit:
            pos_list = positions.get(last_name)
            if not pos_list:
                return False
            k = bisect_left(pos_list, lo)
            if k >= len(pos_list) or pos_list[k] >= j:
                return False
        else:
            for q in range(lo, j):
                if last_name in sym_ends[q]:
                    break
            else:
                return False
        cur = i
        for text in lits:
            pos_list = positions.get(text)
            if not pos_list:
                return False
            k = bisect_left(pos_list, cur)
            if k >= len(pos_list) or pos_list[k] >= j:
                return False
            cur = pos_list[k] + 1
        return True

    def _embeddings(
        self,
        rule: Rule,
        i: int,
        j: int,
        positions: Mapping[str, list[int]],
        start_index: Sequence[Mapping[str, list]],
        max_skip: int | None,
    ) -> list[tuple[tuple[Entry, ...], int]]:
        """All ways to match ``rule.rhs`` over span (i, j): returns
        (child entries for symbol items, locally skipped token count).

        Matching jumps straight to literal occurrences (``positions``) and to
        completed spans by start (``start_index[pos][sym]``, ascending ends);
        the tokens skipped over are counted against ``max_skip``. Suffix
        completions are memoized per (item index, position)."""
        rhs = rule.rhs
        n_items = len(rhs)
        child_filter = rule.child_filter
        cap = max_skip if max_skip is not None else (j - i)
        cap = min(cap, j - i)
        memo: dict[tuple[int, int], list] = {}
        empty: list = []

        def completions(idx: int, pos: int) -> list:
            key = (idx, pos)
            cached = memo.get(key)
            if cached is not None:
                return cached
            if idx == n_items:
                sk = j - pos
                res = [((), sk)] if sk <= cap else empty
                memo[key] = res
                return res
            if pos + (n_items - idx) > j:
                memo[key] = empty
                return empty
            res = []
            item = rhs[idx]
            if item.__class__ is Lit:
                pos_list = positions.get(item.text)
                if pos_list:
                    for k in range(bisect_left(pos_list, pos), len(pos_list)):
                        q = pos_list[k]
                        lead = q - pos
                        if lead > cap or q >= j:
                            break
                        for children, sk in completions(idx + 1, q + 1):
                            if sk + lead <= cap:
                                res.append((children, sk + lead))
            else:
                name = item.name
                hi = min(pos + cap, j - 1)
                for p0 in range(pos, hi + 1):
                    lead = p0 - pos
                    for p, bucket in start_index[p0].get(name, empty):
                        if p > j:
                            break
                        tails = completions(idx + 1, p)
                        if not tails:
                            continue
                        for entry in bucket.values():
                            if child_filter is not None and not child_filter(idx, entry.sem):
                                continue
                            for children, sk in tails:
                                if sk + lead <= cap:
                                    res.append(((entry,) + children, sk + lead))
            if len(res) > 1:  # keep the fewest-skips embedding per child combination
                best: dict[tuple, tuple] = {}
                for children, sk in res:
                    k = tuple(map(id, children))
                    cur = best.get(k)
                    if cur is None or sk < cur[1]:
                        best[k] = (children, sk)
                res = list(best.values())
            memo[key] = res
            return res

        return completions(0, i)

    def _apply(
        self,
        rule: Rule,
        children: tuple[Entry, ...],
        local_skips: int,
        record: bool,
        sem_cache: dict | None = None,
    ):
        key = None
        sems = None
        if sem_cache is not None:
            key = (rule.rule_id, tuple(id(c.sem) for c in children))
            sems = sem_cache.get(key)
        if sems is None:
            try:
                sem = rule.builder(*[c.sem for c in children])
            except Exception:  # builders are total over type-correct children
                sems = ()
            else:
                raw = sem if isinstance(sem, list) else [sem]
                # canonicalize eagerly so equivalent derivations merge in-cell
                sems = tuple(
                    normalize(s) if isinstance(s, Expr) else s for s in raw if s is not None
                )
            if sem_cache is not None:
                sem_cache[key] = sems
        if not sems:
            return ()
        results = []
        skips = local_skips
        size = 1
        for c in children:
            skips += c.skips
            size += c.size
        for s in sems:
            deriv = None
            if record:
                deriv = (rule.rule_id, local_skips, tuple(c.deriv for c in children))
            results.append(Entry(rule.lhs, s, skips, size, deriv))
        return results

    # -- chart ------------------------------------------------------------

    def chart(
        self,
        tokens: Sequence[Token],
        *,
        beam: int | None = None,
        max_skip: int | None = None,
        record_derivations: bool = False,
    ) -> dict[tuple[int, int], _Cell]:
        if beam is None:
            beam = self.grammar.beam
        if max_skip is None:
            max_skip = self.grammar.max_skip
        n = len(tokens)
        lex_rules, comp_rules = self._active_rules(tokens)
        # symbols never consumed by another rule only matter over the full span
        consumed = {it.name for r in self.grammar.rules for it in r.rhs if isinstance(it, Sym)}
        positions: dict[str, list[int]] = {}
        for p, tok in enumerate(tokens):
            if not tok.quoted:
                positions.setdefault(tok.text, []).append(p)
        sym_starts: list[set[str]] = [set() for _ in range(n)]
        sym_ends: list[set[str]] = [set() for _ in range(n)]
        # start_index[pos][sym] = [(end, bucket), ...] ascending by end
        start_index: list[dict[str, list]] = [{} for _ in range(n)]
        sem_cache: dict = {}
        cap = max_skip
        # literal-anchored rules can only start within `cap` of one of their
        # first literal's occurrences (and end near their last literal's);
        # resolve those windows once per sentence
        rule_starts: dict[int, frozenset] = {}
        rule_ends: dict[int, frozenset] = {}
        for rule in lex_rules + comp_rules:
            lits, first_lit, first_name, last_lit, last_name = self.rule_info[rule.rule_id]
            if first_lit:
                starts: set[int] = set()
                for p in positions.get(first_name, ()):
                    starts.update(range(max(0, p - cap), p + 1))
                rule_starts[rule.rule_id] = frozenset(starts)
            if last_lit:
                ends: set[int] = set()
                for p in positions.get(last_name, ()):
                    ends.update(range(p + 1, min(n, p + 1 + cap) + 1))
                rule_ends[rule.rule_id] = frozenset(ends)
        cells: dict[tuple[int, int], _Cell] = {}
        for length in range(1, n + 1):
            for i in range(0, n - length + 1):
                j = i + length
                full_span = i == 0 and j == n
                cell = _Cell()
                # dynamic seeds: quoted strings and digit tokens
                if length == 1:
                    tok = tokens[i]
                    if tok.quoted:
                        cell.add(Entry("STR", string(tok.text), 0, 1, ("quoted", i) if record_derivations else None))
                    elif _DIGITS.match(tok.text):
                        cell.add(Entry("INT", integer(int(tok.text)), 0, 1, ("digits", i) if record_derivations else None))
                for rule_set in (lex_rules, comp_rules):
                    for rule in rule_set:
                        if len(rule.rhs) > length:
                            continue
                        if rule.lhs not in consumed and not full_span:
                            continue
                        rid = rule.rule_id
                        anchored = rule_starts.get(rid)
                        if anchored is not None and i not in anchored:
                            continue
                        anchored = rule_ends.get(rid)
                        if anchored is not None and j not in anchored:
                            continue
                        if not self._can_match(rule, i, j, cap, positions, sym_starts, sym_ends):
                            continue
                        for children, skips in self._embeddings(rule, i, j, positions, start_index, max_skip):
                            for entry in self._apply(rule, children, skips, record_derivations, sem_cache):
                                cell.add(entry)
                # unary closure to fixpoint
                changed = True
                while changed:
                    changed = False
                    for rule in self.unary:
                        if rule.lhs not in consumed and not full_span:
                            continue
                        for child in cell.by_symbol(rule.rhs[0].name):
                            for entry in self._apply(rule, (child,), 0, record_derivations, sem_cache):
                                changed |= cell.add(entry)
                cell.prune(beam)
                cells[(i, j)] = cell
                start_map = start_index[i]
                for sym, bucket in cell.by_sym.items():
                    sym_starts[i].add(sym)
                    sym_ends[j - 1].add(sym)
                    start_map.setdefault(sym, []).append((j, bucket))
        return cells

    # -- logical forms ------------------------------------------------------

    def parse_tokens(
        self,
        tokens: Sequence[Token],
        fallback_polarity: int,
        *,
        beam: int | None = None,
        max_skip: int | None = None,
        record_derivations: bool = False,
    ) -> list[LogicalForm]:
        n = len(tokens)
        if n == 0:
            return []
        cells = self.chart(
            tokens, beam=beam, max_skip=max_skip, record_derivations=record_derivations
        )
        top = cells.get((0, n))
        merged: dict[tuple, LogicalForm] = {}

        def offer(pol: int, cond: Expr, skips: int, size: int, deriv) -> None:
            cond = normalize(cond)
            try:
                if infer_type(cond) != "bool":
                    return
            except Exception:
                return
            lf = LogicalForm(pol, cond, skips, size)
            if record_derivations:
                object.__setattr__(lf, "_deriv", deriv)  # test-only breadcrumb
            key = (pol, to_sexpr(cond))
            old = merged.get(key)
            if old is None or (lf.skipped, lf.size) < (old.skipped, old.size):
                merged[key] = lf

        if top is not None:
            for entry in top.by_symbol(self.grammar.start_symbol):
                pol, cond = entry.sem
                offer(pol, cond, entry.skips, entry.size, entry.deriv)
            for entry in top.by_symbol(self.grammar.bool_symbol):
                offer(fallback_polarity, entry.sem, entry.skips, entry.size, entry.deriv)
        return sorted(merged.values(), key=lambda lf: (lf.sort_key(), lf.polarity))


def parse_text(
    grammar: Grammar,
    text: str,
    label: int,
    *,
    beam: int | None = None,
    max_skip: int | None = None,
    record_derivations: bool = False,
) -> list[LogicalForm]:
    """Parse one explanation string; unparseable input yields an empty list."""
    tokens = tokenize_explanation(text)
    parser = ChartParser(grammar)
    return parser.parse_tokens(
        tokens, label, beam=beam, max_skip=max_skip, record_derivations=record_derivations
    )


def parse(grammar: Grammar, explanation: Explanation, **kwargs) -> list[LogicalForm]:
    """All candidate logical forms for one explanation, merged by normal form
    and sorted deterministically."""
    return parse_text(grammar, explanation.text, explanation.label, **kwargs)


@dataclass
class ParseAllResult:
    candidates: dict[str, list[LogicalForm]]
    errors: dict[str, str]
    wall_clock: float


def parse_all(grammar: Grammar, explanations: Iterable[Explanation]) -> ParseAllResult:
    """Parse each explanation independently; tokenization errors are
    collected per explanation rather than raised."""
    parser = ChartParser(grammar)
    results: dict[str, list[LogicalForm]] = {}
    errors: dict[str, str] = {}
    started = time.perf_counter()
    for expl in explanations:
        try:
            tokens = tokenize_explanation(expl.text)
        except (TokenizeError, ValueError) as exc:
            errors[expl.id] = str(exc)
            results[expl.id] = []
            continue
        results[expl.id] = parser.parse_tokens(tokens, expl.label)
    return ParseAllResult(results, errors, time.perf_counter() - started)
