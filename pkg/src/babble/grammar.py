"""Declarative grammar over explanation language.

Rules are instantiated from a paraphrase table: each template row is a
pattern over literal tokens, alternation groups, optional groups, and typed
slots, paired with a builder that assembles the logical form. Adding a new
paraphrase means adding a variant to a pattern; the rule set itself is
domain independent.

Pattern syntax:
    (a|b c)   alternation over literal sequences
    [a|b]     optional group
    $E $S2    slot; trailing digits distinguish repeats of one symbol
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .lf import (
    ARG_X,
    ARG_Y,
    SENTENCE,
    Expr,
    LfError,
    alias as alias_expr,
    integer,
)

__all__ = ["Grammar", "GrammarError", "Rule", "Lit", "Sym", "build_default_grammar", "REQUIRED_PREDICATES"]


class GrammarError(LfError):
    """Raised for invalid grammar construction (e.g. reserved alias names)."""


@dataclass(frozen=True)
class Lit:
    text: str


@dataclass(frozen=True)
class Sym:
    name: str


@dataclass(frozen=True)
class Rule:
    rule_id: int
    lhs: str
    rhs: tuple[object, ...]
    builder: Callable = field(compare=False)
    kind: str = "compositional"
    # optional pre-filter: (rhs item index, candidate child sem) -> keep?
    child_filter: Callable | None = field(default=None, compare=False)

    def dump(self) -> str:
        items = " ".join(i.text if isinstance(i, Lit) else f"<{i.name}>" for i in self.rhs)
        return f"{self.lhs} -> {items}"


@dataclass(frozen=True)
class Grammar:
    rules: tuple[Rule, ...]
    aliases: Mapping[str, frozenset[str]]
    max_skip: int = 2
    beam: int = 100
    start_symbol: str = "START"
    bool_symbol: str = "BOOL"

    def dump(self) -> str:
        return "\n".join(r.dump() for r in self.rules)

    @property
    def literal_vocab(self) -> frozenset[str]:
        return frozenset(i.text for r in self.rules for i in r.rhs if isinstance(i, Lit))


# every predicate family the grammar must be able to emit
REQUIRED_PREDICATES = frozenset(
    {
        "and", "or", "not", "any", "all", "none",
        "eq", "ne", "lt", "le", "gt", "ge",
        "lower", "upper", "capital", "all_caps",
        "starts_with", "ends_with", "substring",
        "person", "location", "date", "number", "organization",
        "list", "set", "count", "contains", "intersection", "map", "filter", "alias",
        "word_distance", "character_distance",
        "left", "right", "between", "within",
    }
)

_SLOT_SYMBOLS = {
    "E": "ENTITY",
    "P": "EPAIR",
    "R": "RGN",
    "S": "STR",
    "C": "COLL",
    "I": "INT",
    "M": "CMP",
    "U": "UNIT",
    "N": "NOUN",
    "V": "BVAR",
    "L": "BVLIST",
    "A": "ALIAS",
    "B": "BOOL",
    "LOC": "LOC",
}

_NUMBER_WORDS = {
    "one": 1, "two": 2, "three": 3, "four": 4, "five": 5, "six": 6, "seven": 7,
    "eight": 8, "nine": 9, "ten": 10, "eleven": 11, "twelve": 12, "thirteen": 13,
    "fourteen": 14, "fifteen": 15, "sixteen": 16, "seventeen": 17, "eighteen": 18,
    "nineteen": 19, "twenty": 20,
}


def _expand_pattern(pattern: str) -> list[list[object]]:
    """Expand a template pattern into concrete rhs item sequences."""

    def parse_units(text: str) -> list[list[list[str]]]:
        # returns sequence of units; each unit is a list of alternative
        # token sequences ([] allowed for optional groups)
        units: list[list[list[str]]] = []
        i, n = 0, len(text)
        while i < n:
            c = text[i]
            if c.isspace():
                i += 1
                continue
            if c == "\\" and i + 1 < n:
                units.append([[text[i : i + 2]]])
                i += 2
                continue
            if c in "([":
                close = ")" if c == "(" else "]"
                depth, j = 1, i + 1
                while j < n and depth:
                    if text[j] == c:
                        depth += 1
                    elif text[j] == close:
                        depth -= 1
                    j += 1
                if depth:
                    raise GrammarError(f"unbalanced group in pattern {text!r}")
                inner = text[i + 1 : j - 1]
                alts = [a.strip() for a in inner.split("|")]
                unit = [a.split() for a in alts if a]
                if c == "[":
                    unit = [[]] + unit
                units.append(unit)
                i = j
            else:
                j = i
                while j < n and not text[j].isspace() and text[j] not in "([":
                    j += 1
                units.append([[text[i:j]]])
                i = j
        return units

    def to_items(tokens: list[str]) -> list[object]:
        items: list[object] = []
        for t in tokens:
            if t.startswith("\\"):
                items.append(Lit(t[1:]))
            elif t.startswith("$"):
                name = re.sub(r"\d+$", "", t[1:])
                if name not in _SLOT_SYMBOLS:
                    raise GrammarError(f"unknown slot {t!r}")
                items.append(Sym(_SLOT_SYMBOLS[name]))
            else:
                items.append(Lit(t.lower()))
        return items

    combos: list[list[str]] = [[]]
    for unit in parse_units(pattern):
        combos = [c + alt for c in combos for alt in unit]
    out = []
    for c in combos:
        if c:
            out.append(to_items(c))
    return out


# ---------------------------------------------------------------------------
# builder helpers
# ---------------------------------------------------------------------------


def _and(*xs: Expr) -> Expr:
    xs = tuple(x for x in xs if x is not None)
    return xs[0] if len(xs) == 1 else Expr("and", xs)


def _or(*xs: Expr) -> Expr:
    xs = tuple(x for x in xs if x is not None)
    return xs[0] if len(xs) == 1 else Expr("or", xs)


def _not(x: Expr) -> Expr:
    return Expr("not", (x,))


def _cmp(op: str, a: Expr, b: Expr) -> Expr:
    return Expr(op, (a, b))


def _contains(container: Expr, needle: Expr, mode: str) -> Expr:
    return Expr("contains", (container, needle), mode)


def _window(side: str, anchor: Expr, k: Expr, unit: str) -> Expr:
    return Expr(side, (anchor, k), unit)


def _count(x: Expr) -> Expr:
    return Expr("count", (x,))


def _members(coll: Expr) -> list[Expr]:
    if coll.op in ("list", "set"):
        return list(coll.args)
    if coll.op == "alias":
        return [Expr("str", value=w) for w in coll.value[1]]
    return [coll]


def _coll_mode(coll: Expr) -> str:
    return "all" if coll.op == "set" else "any"


def _member_in_loc(coll: Expr, loc, negated: bool) -> Expr:
    """membership of a string collection in a locative region"""
    mode = "none" if negated else _coll_mode(coll)
    if loc[0] == "rgn":
        return _contains(loc[1], coll, mode)
    _, lft, rgt = loc
    if mode == "none":
        return _and(_contains(lft, coll, "none"), _contains(rgt, coll, "none"))
    if mode == "any":
        return _or(_contains(lft, coll, "any"), _contains(rgt, coll, "any"))
    parts = [
        _or(_contains(lft, Expr("list", (m,)), "any"), _contains(rgt, Expr("list", (m,)), "any"))
        for m in _members(coll)
    ]
    return _and(*parts)


def _entity_in_loc(region: Expr, loc, negated: bool) -> Expr:
    mode = "none" if negated else "any"
    if loc[0] == "rgn":
        return _contains(loc[1], region, mode)
    _, lft, rgt = loc
    if mode == "none":
        return _and(_contains(lft, region, "none"), _contains(rgt, region, "none"))
    return _or(_contains(lft, region, "any"), _contains(rgt, region, "any"))


ANY_TOKEN = "any-token"  # NOUN sem for bare "word(s)": count tokens, no test


def _noun_count_expr(noun, region: Expr) -> Expr:
    if noun is ANY_TOKEN or noun is None:
        return _count(region)
    return _count(Expr("filter", (region, noun)))


def _noun_presence(noun, loc):
    """existence of a matching token in a locative region"""

    def one(region: Expr) -> Expr:
        if isinstance(noun, Expr) and noun.op in ("person", "location", "date", "number", "organization") and not noun.args:
            return Expr(noun.op, (region,))
        return _cmp("ge", _noun_count_expr(noun, region), integer(1))

    if loc[0] == "rgn":
        return one(loc[1])
    return _or(one(loc[1]), one(loc[2]))


def _noun_count_cmp(op: str, k: Expr, noun, loc):
    if loc[0] != "rgn":
        return None
    return _cmp(op, _noun_count_expr(noun, loc[1]), k)


def _occ_count_cmp(op: str, k: Expr, s: Expr, loc):
    if loc[0] != "rgn":
        return None
    return _cmp(op, Expr("count", (s, loc[1])), k)


def _pair_between() -> Expr:
    return Expr("between", (ARG_X, ARG_Y))


def _dist(unit: str, a: Expr, b: Expr) -> Expr:
    op = "word_distance" if unit == "words" else "character_distance"
    return Expr(op, (a, b))


# ---------------------------------------------------------------------------
# the paraphrase table
# ---------------------------------------------------------------------------


def _rows() -> list[tuple[str, str, Callable]]:
    R: list[tuple[str, str, Callable, Callable | None]] = []

    def row(lhs: str, pattern: str, builder: Callable, child_filter: Callable | None = None) -> None:
        R.append((lhs, pattern, builder, child_filter))

    # --- anchors and simple phrases -------------------------------------
    x_names = (
        "x|person 1|person1|person x|the first person|first person|entity 1|entity x|"
        "arg 1|argument 1|chemical|the chemical|chemical name|the chemical name|"
        "protein|the protein|protein name|the protein name"
    )
    y_names = (
        "y|person 2|person2|person y|the second person|second person|entity 2|entity y|"
        "arg 2|argument 2|disease|the disease|disease name|the disease name|"
        "kinase|the kinase|kinase name|the kinase name"
    )
    row("ENTITY", f"({x_names})", lambda: ARG_X)
    row("ENTITY", f"({y_names})", lambda: ARG_Y)
    row("ENTITY", "z", lambda: SENTENCE)
    row("EPAIR", "(them|each other|one another)", lambda: ("pair",))
    row("RGN", "(the sentence|sentence|this sentence|the text|the tweet|z)", lambda: SENTENCE)
    row("RGN", "$E", lambda e: e)
    row("STR", "$E", lambda e: e)
    row("COLL", "$S", lambda s: Expr("list", (s,)))
    row("COLL", "$A", lambda a: a)
    row("COLL", "[a|an] $A (word|words)", lambda a: a)

    for word, value in _NUMBER_WORDS.items():
        row("INT", word, (lambda v: (lambda: integer(v)))(value))

    row("UNIT", "(word|words|token|tokens)", lambda: "words")
    row("UNIT", "(character|characters|chars|letters)", lambda: "chars")

    for phrase, op in [
        ("more than|greater than|over", "gt"),
        ("less than|fewer than|under|smaller than", "lt"),
        ("at least|no fewer than|no less than", "ge"),
        ("at most|no more than|no greater than", "le"),
        ("exactly", "eq"),
    ]:
        row("CMP", f"({phrase})", (lambda o: (lambda: o))(op))

    # --- noun phrases (token tests) -------------------------------------
    row("NOUN", "(word|words|token|tokens)", lambda: ANY_TOKEN)
    row("NOUN", "(person|people|persons)", lambda: Expr("person"))
    row("NOUN", "(place|places|location|locations)", lambda: Expr("location"))
    row("NOUN", "(date|dates)", lambda: Expr("date"))
    row("NOUN", "(number|numbers)", lambda: Expr("number"))
    row("NOUN", "(organization|organizations|company|companies)", lambda: Expr("organization"))
    row("NOUN", "(capitalized|capitalised) (word|words)", lambda: Expr("capital"))
    row("NOUN", "(lowercase|lower case) (word|words)", lambda: Expr("lower"))
    row("NOUN", "(uppercase|upper case|all caps) (word|words)", lambda: Expr("all_caps"))
    row("NOUN", "(word|words) containing $S", lambda s: Expr("substring", (s,)))
    row("NOUN", "(word|words) (starting|that starts|that start|beginning) with $S", lambda s: Expr("starts_with", (s,)))
    row("NOUN", "(word|words) (ending|that ends|that end) with $S", lambda s: Expr("ends_with", (s,)))

    # --- locative phrases ------------------------------------------------
    row("LOC", "in $R", lambda r: ("rgn", r))
    row("LOC", "[in] between $E and $E2", lambda a, b: ("rgn", Expr("between", (a, b))))
    row("LOC", "[in] between $P", lambda p: ("rgn", _pair_between()))
    row("LOC", "(before|to the left of|left of|in front of|preceding) $E",
        lambda e: ("rgn", Expr("left", (e,))))
    row("LOC", "(after|to the right of|right of|following) $E",
        lambda e: ("rgn", Expr("right", (e,))))
    row("LOC", "(somewhere|anywhere) (before|to the left of) $E", lambda e: ("rgn", Expr("left", (e,))))
    row("LOC", "(somewhere|anywhere) (after|to the right of) $E", lambda e: ("rgn", Expr("right", (e,))))
    # bare directions keep the "right X"/"left X" readings available when a
    # neighboring token gets skipped (the classic "right before" ambiguity)
    row("LOC", "left $E", lambda e: ("rgn", Expr("left", (e,))))
    row("LOC", "right $E", lambda e: ("rgn", Expr("right", (e,))))
    row("LOC", "(right|immediately|directly|just) (before|in front of) $E",
        lambda e: ("rgn", _window("left", e, integer(1), "words")))
    row("LOC", "(right|immediately|directly|just) after $E",
        lambda e: ("rgn", _window("right", e, integer(1), "words")))
    row("LOC", "within $I $U of $E",
        lambda k, u, e: ("either", _window("left", e, k, u), _window("right", e, k, u)))
    row("LOC", "within $I $U (before|to the left of|left of) $E",
        lambda k, u, e: ("rgn", _window("left", e, k, u)))
    row("LOC", "within $I $U (after|to the right of|right of) $E",
        lambda k, u, e: ("rgn", _window("right", e, k, u)))
    row("LOC", "$I $U (before|to the left of|left of) $E",
        lambda k, u, e: [("rgn", _window("left", e, k, u)),
                         ("rgn", _window("left", e, integer(k.value + 1), u))])
    row("LOC", "$I $U (after|to the right of|right of) $E",
        lambda k, u, e: [("rgn", _window("right", e, k, u)),
                         ("rgn", _window("right", e, integer(k.value + 1), u))])
    row("LOC", "(before|to the left of|left of) $E or $E2",
        lambda a, b: ("either", Expr("left", (a,)), Expr("left", (b,))))
    row("LOC", "(after|to the right of|right of) $E or $E2",
        lambda a, b: ("either", Expr("right", (a,)), Expr("right", (b,))))

    # --- string collections ----------------------------------------------
    row("COLL", "$S or $S2", lambda a, b: Expr("list", (a, b)))
    row("COLL", "$S and $S2", lambda a, b: Expr("set", (a, b)))
    row("COLL", "$S , $C", lambda s, c: Expr(c.op if c.op in ("list", "set") else "list", (s,) + _tuple_members(c)))
    row("COLL", "$S , or $S2", lambda a, b: Expr("list", (a, b)))
    row("COLL", "$S , and $S2", lambda a, b: Expr("set", (a, b)))
    row("COLL", "\\( $S , $S2 \\)", lambda a, b: Expr("list", (a, b)))
    row("COLL", "the (word|words) $C", lambda c: c)

    # --- membership and position of strings ------------------------------
    affirm = "(is|are|occurs|occur|appears|appear|exists|exist|is found|are found|can be found|is located|are located)"
    negate = (
        "(is not|are not|is never|are never|does not occur|do not occur|does not appear|"
        "do not appear|never occurs|never occur|is not found|are not found|cannot be found|"
        "does not exist|do not exist)"
    )
    row("BOOL", f"$C {affirm} $LOC", lambda c, loc: _member_in_loc(c, loc, negated=False))
    row("BOOL", f"$C {negate} $LOC", lambda c, loc: _member_in_loc(c, loc, negated=True))
    row("BOOL", f"$E {affirm} $LOC", lambda e, loc: _entity_in_loc(e, loc, negated=False))
    row("BOOL", f"$E {negate} $LOC", lambda e, loc: _entity_in_loc(e, loc, negated=True))
    row("BOOL", "$R contains $C", lambda r, c: _contains(r, c, _coll_mode(c)))
    row("BOOL", "$R (does not contain|do not contain) $C", lambda r, c: _contains(r, c, "none"))
    row("BOOL", "$S contains $S2", lambda a, b: Expr("substring", (a, b)))
    row("BOOL", "$S (does not contain|do not contain) $S2", lambda a, b: _not(Expr("substring", (a, b))))
    row("BOOL", "$E (is|are) [immediately] preceded by $C",
        lambda e, c: [_member_in_loc(c, ("rgn", _window("left", e, integer(1), "words")), False),
                      _member_in_loc(c, ("rgn", Expr("left", (e,))), False)])
    row("BOOL", "$E (is|are) [immediately] followed by $C",
        lambda e, c: [_member_in_loc(c, ("rgn", _window("right", e, integer(1), "words")), False),
                      _member_in_loc(c, ("rgn", Expr("right", (e,))), False)])
    row("BOOL", "$E (is not|are not) [immediately] (preceded|followed) by $C",
        lambda e, c: None)  # rare; avoid ambiguous direction under negation

    # --- noun presence ----------------------------------------------------
    row("BOOL", f"(a|an) $N {affirm} $LOC", lambda n, loc: _noun_presence(n, loc))
    row("BOOL", f"(a|an) $N {negate} $LOC",
        lambda n, loc: _not(_noun_presence(n, loc)))
    row("BOOL", "there (is|are) (a|an) $N $LOC", lambda n, loc: _noun_presence(n, loc))
    row("BOOL", "there (is|are) no $N $LOC", lambda n, loc: _not(_noun_presence(n, loc)))

    # --- counting ---------------------------------------------------------
    row("BOOL", "there (is|are) $I $N $LOC", lambda k, n, loc: _noun_count_cmp("eq", k, n, loc))
    row("BOOL", "there (is|are) $M $I $N $LOC", lambda m, k, n, loc: _noun_count_cmp(m, k, n, loc))
    row("BOOL", "there (is|are) $I $S $LOC", lambda k, s, loc: _occ_count_cmp("eq", k, s, loc))
    row("BOOL", "there (is|are) $M $I $S $LOC", lambda m, k, s, loc: _occ_count_cmp(m, k, s, loc))
    row("BOOL", "the [total] number of $N $LOC is $M $I",
        lambda n, loc, m, k: _noun_count_cmp(m, k, n, loc))
    row("BOOL", "the [total] number of $N $LOC is $I",
        lambda n, loc, k: _noun_count_cmp("eq", k, n, loc))
    row("BOOL", "$R contains $I $N", lambda r, k, n: _cmp("eq", _noun_count_expr(n, r), k))
    row("BOOL", "$R contains $M $I $N", lambda r, m, k, n: _cmp(m, _noun_count_expr(n, r), k))

    # --- case and string tests --------------------------------------------
    row("BOOL", "$S (is|are) (lowercase|lower case|in lowercase|in lower case)",
        lambda s: Expr("lower", (s,)))
    row("BOOL", "$S (is|are) (uppercase|upper case|in uppercase|in upper case)",
        lambda s: Expr("upper", (s,)))
    row("BOOL", "$S (is|are) (capitalized|capitalised)", lambda s: Expr("capital", (s,)))
    row("BOOL", "$S (is|are) (in all caps|all caps|in capital letters|in all capital letters)",
        lambda s: Expr("all_caps", (s,)))
    row("BOOL", "$S (starts|start|begins|begin) with $S2", lambda a, b: Expr("starts_with", (a, b)))
    row("BOOL", "$S (does not start|do not start|does not begin|do not begin) with $S2",
        lambda a, b: _not(Expr("starts_with", (a, b))))
    row("BOOL", "$S (ends|end|finishes|finish) with $S2", lambda a, b: Expr("ends_with", (a, b)))
    row("BOOL", "$S (does not end|do not end) with $S2", lambda a, b: _not(Expr("ends_with", (a, b))))

    # --- comparisons --------------------------------------------------------
    row("BOOL", "$S (is|are) equal to $S2", lambda a, b: _cmp("eq", a, b))
    row("BOOL", "$S equals $S2", lambda a, b: _cmp("eq", a, b))
    row("BOOL", "$S (is|are) the same as $S2", lambda a, b: _cmp("eq", a, b))
    row("BOOL", "$S (is|are) not $S2", lambda a, b: _cmp("ne", a, b))
    row("BOOL", "$S (is|are) (not equal to|different from) $S2", lambda a, b: _cmp("ne", a, b))
    row("BOOL", "$S (is|are) (smaller|less|lower|fewer) than $S2", lambda a, b: _cmp("lt", a, b))
    row("BOOL", "$S (is|are) (larger|greater|bigger|more) than $S2", lambda a, b: _cmp("gt", a, b))
    row("BOOL", "$S (is|are) at least $S2", lambda a, b: _cmp("ge", a, b))
    row("BOOL", "$S (is|are) (at most|no more than|no greater than|no larger than) $S2",
        lambda a, b: _cmp("le", a, b))

    # --- intersections ------------------------------------------------------
    row("BOOL", "at least $I of $C (is|are) in $R",
        lambda k, c, r: _cmp("ge", _count(Expr("intersection", (c, r))), k))
    row("BOOL", "$M $I of $C (is|are) in $R",
        lambda m, k, c, r: _cmp(m, _count(Expr("intersection", (c, r))), k))
    row("BOOL", "$I of $C (is|are) in $R",
        lambda k, c, r: _cmp("eq", _count(Expr("intersection", (c, r))), k))

    # --- map ------------------------------------------------------------------
    row("BOOL", "$S is at the (start|beginning) of a word in $R",
        lambda s, r: Expr("any", (Expr("map", (Expr("starts_with", (s,)), r)),)))
    row("BOOL", "$S is at the end of a word in $R",
        lambda s, r: Expr("any", (Expr("map", (Expr("ends_with", (s,)), r)),)))

    # --- entity order and distance ---------------------------------------------
    comes = "(is|are|comes|come|appears|appear|occurs|occur)"
    row("BOOL", f"$E {comes} [somewhere] (before|to the left of|left of|left) $E2",
        lambda a, b: Expr("left", (a, b)))
    row("BOOL", f"$E {comes} [somewhere] (after|to the right of|right of|right) $E2",
        lambda a, b: Expr("right", (a, b)))
    row("BOOL", "$E precedes $E2", lambda a, b: Expr("left", (a, b)))
    row("BOOL", "$E follows $E2", lambda a, b: Expr("right", (a, b)))
    row("BOOL", "$E (is not|are not|does not come|does not appear|does not occur) (before|to the left of|left of) $E2",
        lambda a, b: _not(Expr("left", (a, b))))
    row("BOOL", "$E (is not|are not|does not come|does not appear|does not occur) (after|to the right of|right of) $E2",
        lambda a, b: _not(Expr("right", (a, b))))
    row("BOOL", f"$E {comes} (right|immediately|directly|just) before $E2",
        lambda a, b: _and(Expr("left", (a, b)), _cmp("eq", _dist("words", a, b), integer(0))))
    row("BOOL", f"$E {comes} (right|immediately|directly|just) after $E2",
        lambda a, b: _and(Expr("right", (a, b)), _cmp("eq", _dist("words", a, b), integer(0))))
    row("BOOL", "$E is $I $U (before|to the left of) $E2",
        lambda a, k, u, b: [_and(Expr("left", (a, b)), _cmp("eq", _dist(u, a, b), k)),
                            _and(Expr("left", (a, b)), _cmp("lt", _dist(u, a, b), k))])
    row("BOOL", "$E is $I $U (after|to the right of) $E2",
        lambda a, k, u, b: [_and(Expr("right", (a, b)), _cmp("eq", _dist(u, a, b), k)),
                            _and(Expr("right", (a, b)), _cmp("lt", _dist(u, a, b), k))])
    row("BOOL", "$E (is|are) within $I $U of $E2",
        lambda a, k, u, b: Expr("within", (a, b, k), u))
    row("BOOL", "[with] $M $I $U between $P", lambda m, k, u, p: _cmp(m, _dist(u, ARG_X, ARG_Y), k))
    row("BOOL", "[with] $I $U between $P", lambda k, u, p: _cmp("eq", _dist(u, ARG_X, ARG_Y), k))
    row("BOOL", "[with] $M $I $U between $E and $E2",
        lambda m, k, u, a, b: _cmp(m, _dist(u, a, b), k))
    row("BOOL", "the (distance|gap) between $E and $E2 is $M $I $U",
        lambda a, b, m, k, u: _cmp(m, _dist(u, a, b), k))

    # --- boolean connectives -----------------------------------------------------
    # left operand may not share the connective: conjunction chains derive
    # right-nested only, which collapses bracketing ambiguity without losing
    # any normalized parse
    def conj(op: str):
        def build(a: Expr, b: Expr) -> Expr | None:
            if a.op == op:
                return None
            return Expr(op, (a, b))

        return build

    def left_not(op: str):
        return lambda idx, sem: not (idx == 0 and isinstance(sem, Expr) and sem.op == op)

    row("BOOL", "$B and $B2", conj("and"), left_not("and"))
    row("BOOL", "$B , and $B2", conj("and"), left_not("and"))
    row("BOOL", "$B or $B2", conj("or"), left_not("or"))
    row("BOOL", "$B , or $B2", conj("or"), left_not("or"))
    row("BOOL", "$B with $B2", conj("and"), left_not("and"))
    row("BOOL", "both $B and $B2", conj("and"), left_not("and"))
    row("BOOL", "\\( $B \\)", lambda b: b)

    # --- placeholder booleans ------------------------------------------------------
    row("BVAR", "(x|y|z)", lambda: Expr("bool", value=True))
    row("BVLIST", "$V", lambda v: ("bv", "and", (v,)))
    row("BVLIST", "$V and $L", lambda v, l: ("bv", "and", (v,) + l[2]))
    row("BVLIST", "$V or $L", lambda v, l: ("bv", "or", (v,) + l[2]))
    row("BVLIST", "$V , $L", lambda v, l: ("bv", l[1], (v,) + l[2]))
    row("BVLIST", "$V , and $L", lambda v, l: ("bv", "and", (v,) + l[2]))
    row("BVLIST", "$V , or $L", lambda v, l: ("bv", "or", (v,) + l[2]))
    row("BOOL", "$V (is|are) true", lambda v: v)
    row("BOOL", "$V (is|are) (not true|false)", lambda v: _not(v))
    row("BOOL", "any of $L (is|are) true", lambda l: Expr("any", l[2]))
    row("BOOL", "all of $L (is|are) true", lambda l: Expr("all", l[2]))
    row("BOOL", "none of $L (is|are) true", lambda l: Expr("none", l[2]))
    row("BOOL", "$L are true", lambda l: Expr("set", l[2]) if len(l[2]) >= 2 else None)

    # --- top level -------------------------------------------------------------------
    row("START", "[label] (true|correct|positive) [,] because $B [.]", lambda b: (1, b))
    row("START", "[label] (false|incorrect|negative) [,] because $B [.]", lambda b: (-1, b))

    return R


def _tuple_members(c: Expr) -> tuple[Expr, ...]:
    if c.op in ("list", "set"):
        return c.args
    return (c,)


def build_default_grammar(
    aliases: Mapping[str, frozenset[str]] | None = None,
    *,
    max_skip: int = 2,
    beam: int = 100,
) -> Grammar:
    """Assemble the full rule set, including one collection rule per alias.

    Raises GrammarError if an alias name collides with a token the grammar
    already treats as meaningful.
    """
    aliases = dict(aliases or {})
    rules: list[Rule] = []
    rid = 0

    def add(lhs: str, rhs: list[object], builder: Callable, child_filter: Callable | None = None) -> None:
        nonlocal rid
        kind = "compositional"
        if all(isinstance(i, Lit) for i in rhs):
            kind = "lexical"
        elif len(rhs) == 1 and isinstance(rhs[0], Sym):
            kind = "unary"
        rules.append(Rule(rid, lhs, tuple(rhs), builder, kind, child_filter))
        rid += 1

    for lhs, pattern, builder, child_filter in _rows():
        for rhs in _expand_pattern(pattern):
            add(lhs, rhs, builder, child_filter)

    vocab = {i.text for r in rules for i in r.rhs if isinstance(i, Lit)}
    for name in sorted(aliases):
        if name in vocab:
            raise GrammarError(f"alias name {name!r} collides with a reserved grammar token")
        words = aliases[name]
        add("ALIAS", [Lit(name)], (lambda n, w: (lambda: alias_expr(n, w)))(name, words))

    grammar = Grammar(
        rules=tuple(rules),
        aliases={k: frozenset(v) for k, v in aliases.items()},
        max_skip=max_skip,
        beam=beam,
    )
    _check_unary_acyclic(grammar)
    return grammar


def _check_unary_acyclic(grammar: Grammar) -> None:
    edges: dict[str, set[str]] = {}
    for r in grammar.rules:
        if r.kind == "unary":
            edges.setdefault(r.rhs[0].name, set()).add(r.lhs)
    seen: set[str] = set()

    def visit(node: str, stack: tuple[str, ...]) -> None:
        if node in stack:
            raise GrammarError(f"unary rule cycle through {node!r}")
        if node in seen:
            return
        seen.add(node)
        for nxt in edges.get(node, ()):
            visit(nxt, stack + (node,))

    for start in list(edges):
        visit(start, ())
