"""Logical forms: the executable expression trees behind labeling functions.

An expression is an immutable tree of ``Expr`` nodes. Node kinds cover logic
(and/or/not/any/all/none/set), comparisons, string and case tests, entity-tag
tests, collections (list/count/contains/intersection/map/filter/alias),
distances (word_distance/character_distance) and positions (left/right/
between/within), plus leaf literals and the anchors ``arg_x``/``arg_y``/
``sentence``.

A ``LogicalForm`` pairs a label polarity with a boolean condition tree and
evaluates to the polarity when the condition holds, 0 (abstain) otherwise.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Any, Iterable

__all__ = [
    "Expr",
    "LogicalForm",
    "LfError",
    "LfTypeError",
    "SexprError",
    "infer_type",
    "normalize",
    "to_sexpr",
    "lf_to_sexpr",
    "from_sexpr",
    "lf_from_sexpr",
    "describe",
    "ARG_X",
    "ARG_Y",
    "SENTENCE",
    "TRUE",
    "FALSE",
]


class LfError(Exception):
    """Base error for logical-form handling."""


class LfTypeError(LfError):
    """An expression tree does not type-check."""


class SexprError(LfError):
    """An s-expression string cannot be parsed."""


# Value categories used by the type checker.
T_BOOL = "bool"
T_INT = "int"
T_FLOAT = "float"
T_STR = "str"
T_RGN = "rgn"  # a set of token positions in the sentence
T_COLL = "coll"  # a collection of strings
T_BLIST = "blist"  # a collection of booleans (produced by map)
T_TEST = "test"  # a per-token predicate used by filter/map

LOGIC_OPS = frozenset({"and", "or", "not", "any", "all", "none", "set"})
CMP_OPS = frozenset({"eq", "ne", "lt", "le", "gt", "ge"})
CASE_OPS = frozenset({"lower", "upper", "capital", "all_caps"})
STRING_OPS = frozenset({"starts_with", "ends_with", "substring"})
TAG_OPS = frozenset({"person", "location", "date", "number", "organization"})
ANCHOR_OPS = frozenset({"arg_x", "arg_y", "sentence"})
LEAF_OPS = frozenset({"bool", "int", "float", "str"})
WINDOW_UNITS = ("words", "chars")
CONTAINS_MODES = ("any", "all", "none")

# str-valued or region-valued: regions coerce to their surface text.
_STRLIKE = frozenset({T_STR, T_RGN})
_NUMLIKE = frozenset({T_INT, T_FLOAT, T_STR, T_RGN})


@dataclass(frozen=True)
class Expr:
    """One node of a logical form. ``value`` carries leaf payloads (literal
    values, the contains mode, window units, alias word sets)."""

    op: str
    args: tuple["Expr", ...] = ()
    value: Any = None
    _hash: int = field(init=False, repr=False, compare=False, default=0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_hash", hash((self.op, self.args, self.value)))

    def __hash__(self) -> int:  # cached; trees are compared constantly
        return self._hash


ARG_X = Expr("arg_x")
ARG_Y = Expr("arg_y")
SENTENCE = Expr("sentence")
TRUE = Expr("bool", value=True)
FALSE = Expr("bool", value=False)


def boolean(v: bool) -> Expr:
    return TRUE if v else FALSE


def integer(v: int) -> Expr:
    return Expr("int", value=int(v))


def string(v: str) -> Expr:
    return Expr("str", value=v)


def alias(name: str, words: Iterable[str]) -> Expr:
    return Expr("alias", value=(name, tuple(sorted(set(words)))))


@functools.lru_cache(maxsize=65536)
def infer_type(e: Expr) -> str:
    """Return the value category of ``e``, raising LfTypeError on a bad tree."""
    op, n = e.op, len(e.args)
    if op in LEAF_OPS:
        if n:
            raise LfTypeError(f"literal {op} takes no children")
        expected = {"bool": bool, "int": int, "float": float, "str": str}[op]
        if not isinstance(e.value, expected) or (op != "bool" and isinstance(e.value, bool)):
            raise LfTypeError(f"literal {op} carries {e.value!r}")
        return {"bool": T_BOOL, "int": T_INT, "float": T_FLOAT, "str": T_STR}[op]
    if op in ANCHOR_OPS:
        if n or e.value is not None:
            raise LfTypeError(f"anchor {op} takes no children")
        return T_RGN
    if op == "alias":
        if n or not (
            isinstance(e.value, tuple)
            and len(e.value) == 2
            and isinstance(e.value[0], str)
            and isinstance(e.value[1], tuple)
        ):
            raise LfTypeError("alias carries (name, words)")
        return T_COLL

    kinds = tuple(infer_type(a) for a in e.args)

    if op in ("and", "or"):
        if n >= 2 and all(k == T_BOOL for k in kinds):
            return T_BOOL
        raise LfTypeError(f"{op} wants >=2 boolean children, got {kinds}")
    if op == "not":
        if kinds == (T_BOOL,):
            return T_BOOL
        raise LfTypeError(f"not wants one boolean child, got {kinds}")
    if op in ("any", "all", "none"):
        if n == 1 and kinds[0] == T_BLIST:
            return T_BOOL
        if n >= 1 and all(k == T_BOOL for k in kinds):
            return T_BOOL
        raise LfTypeError(f"{op} wants booleans or one map result, got {kinds}")
    if op in ("list", "set"):
        if n >= 1 and all(k in _STRLIKE for k in kinds):
            return T_COLL
        if op == "set" and n >= 1 and all(k == T_BOOL for k in kinds):
            return T_BOOL
        raise LfTypeError(f"{op} wants string-like children, got {kinds}")
    if op in CMP_OPS:
        if n == 2 and all(k in _NUMLIKE for k in kinds):
            return T_BOOL
        raise LfTypeError(f"{op} wants two comparable children, got {kinds}")
    if op in CASE_OPS:
        if n == 1 and kinds[0] in _STRLIKE:
            return T_BOOL
        if n == 0:
            return T_TEST
        raise LfTypeError(f"{op} wants one string-like child or none, got {kinds}")
    if op in STRING_OPS:
        if n == 2 and all(k in _STRLIKE for k in kinds):
            return T_BOOL
        if n == 1 and kinds[0] in _STRLIKE:
            return T_TEST
        raise LfTypeError(f"{op} wants two string-like children (or one, as a token test)")
    if op in TAG_OPS:
        if n == 1 and kinds[0] == T_RGN:
            return T_BOOL
        if n == 0:
            return T_TEST
        raise LfTypeError(f"{op} wants one region child or none, got {kinds}")
    if op == "count":
        if n == 1 and kinds[0] in (T_RGN, T_COLL):
            return T_INT
        if n == 2 and kinds[0] in _STRLIKE and kinds[1] == T_RGN:
            return T_INT
        raise LfTypeError(f"count wants a region/collection or (string, region), got {kinds}")
    if op == "contains":
        if e.value not in CONTAINS_MODES:
            raise LfTypeError(f"contains mode must be any/all/none, got {e.value!r}")
        if n == 2 and kinds[0] in _STRLIKE and (kinds[1] in (T_COLL, T_STR, T_RGN)):
            return T_BOOL
        raise LfTypeError(f"contains wants (container, needle), got {kinds}")
    if op == "intersection":
        if n == 2 and kinds[0] == T_COLL and kinds[1] in (T_RGN, T_COLL):
            return T_COLL
        raise LfTypeError(f"intersection wants (collection, region/collection), got {kinds}")
    if op == "map":
        if n == 2 and kinds[0] == T_TEST and kinds[1] in (T_RGN, T_COLL):
            return T_BLIST
        raise LfTypeError(f"map wants (test, region/collection), got {kinds}")
    if op == "filter":
        if n == 2 and kinds[0] == T_RGN and kinds[1] == T_TEST:
            return T_RGN
        raise LfTypeError(f"filter wants (region, test), got {kinds}")
    if op in ("word_distance", "character_distance"):
        if n == 2 and all(k == T_RGN for k in kinds):
            return T_INT
        raise LfTypeError(f"{op} wants two regions, got {kinds}")
    if op in ("left", "right"):
        if n == 1 and kinds[0] == T_RGN and e.value is None:
            return T_RGN
        if n == 2 and kinds == (T_RGN, T_RGN) and e.value is None:
            return T_BOOL
        if n == 2 and kinds == (T_RGN, T_INT) and e.value in WINDOW_UNITS:
            return T_RGN
        raise LfTypeError(f"{op} wants (region) or (region, region) or a window, got {kinds}")
    if op == "between":
        if n == 2 and all(k == T_RGN for k in kinds):
            return T_RGN
        raise LfTypeError(f"between wants two regions, got {kinds}")
    if op == "within":
        if n == 3 and kinds[0] == T_RGN and kinds[1] == T_RGN and kinds[2] == T_INT:
            if e.value not in WINDOW_UNITS:
                raise LfTypeError(f"within unit must be words/chars, got {e.value!r}")
            return T_BOOL
        raise LfTypeError(f"within wants (region, region, int), got {kinds}")
    raise LfTypeError(f"unknown op {op!r}")


@dataclass(frozen=True)
class LogicalForm:
    """Label polarity plus a boolean condition tree.

    ``skipped`` and ``size`` record how the parser derived this form (tokens
    ignored, rule applications) and feed filter tie-breaking.
    """

    polarity: int
    condition: Expr
    skipped: int = 0
    size: int = 0

    def __post_init__(self) -> None:
        if self.polarity not in (-1, 1):
            raise LfError(f"polarity must be -1 or +1, got {self.polarity}")

    def sexpr(self) -> str:
        return lf_to_sexpr(self)

    def sort_key(self) -> tuple:
        return (self.skipped, self.size, lf_to_sexpr(self))


# ---------------------------------------------------------------------------
# normalization
# ---------------------------------------------------------------------------

# n-ary operators whose child order carries no meaning
_COMMUTATIVE = frozenset({"and", "or", "any", "all", "none", "set", "list"})
# binary operators symmetric in their (first two) arguments
_SYMMETRIC2 = frozenset({"eq", "ne", "word_distance", "character_distance", "between", "within"})
_FLATTEN = frozenset({"and", "or"})


@functools.lru_cache(maxsize=200_000)
def normalize(e: Expr) -> Expr:
    """Canonical form: children of commutative operators sorted, nested
    and/or flattened, double negation removed. Idempotent and
    semantics-preserving."""
    args = tuple(normalize(a) for a in e.args)
    if e.op == "not" and args and args[0].op == "not":
        return args[0].args[0]
    if e.op in _FLATTEN:
        flat: list[Expr] = []
        for a in args:
            if a.op == e.op:
                flat.extend(a.args)
            else:
                flat.append(a)
        args = tuple(flat)
    if e.op in _COMMUTATIVE and len(args) > 1:
        args = tuple(sorted(args, key=to_sexpr))
    elif e.op in _SYMMETRIC2 and len(args) >= 2:
        head = tuple(sorted(args[:2], key=to_sexpr))
        args = head + args[2:]
    if args == e.args:
        return e
    return Expr(e.op, args, e.value)


def normalize_lf(lf: LogicalForm) -> LogicalForm:
    cond = normalize(lf.condition)
    if cond is lf.condition:
        return lf
    return LogicalForm(lf.polarity, cond, lf.skipped, lf.size)


# ---------------------------------------------------------------------------
# s-expressions (the canonical interchange format)
# ---------------------------------------------------------------------------


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


@functools.lru_cache(maxsize=200_000)
def to_sexpr(e: Expr) -> str:
    op = e.op
    if op in ANCHOR_OPS:
        return op
    if op == "bool":
        return "(bool true)" if e.value else "(bool false)"
    if op == "int":
        return f"(int {e.value})"
    if op == "float":
        return f"(float {e.value!r})"
    if op == "str":
        return f"(str {_quote(e.value)})"
    if op == "alias":
        name, words = e.value
        return "(alias " + " ".join([_quote(name)] + [_quote(w) for w in words]) + ")"
    payload = ""
    if op == "contains":
        payload = f" {e.value}"
    elif op in ("left", "right") and e.value is not None:
        payload = f" {e.value}"
    elif op == "within":
        payload = f" {e.value}"
    inner = "".join(" " + to_sexpr(a) for a in e.args)
    return f"({op}{payload}{inner})"


def lf_to_sexpr(lf: LogicalForm) -> str:
    return f"(lf {lf.polarity:+d} {to_sexpr(lf.condition)})"


def _lex_sexpr(text: str) -> list:
    toks: list = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
        elif c in "()":
            toks.append(c)
            i += 1
        elif c == '"':
            j = i + 1
            out = []
            while j < n and text[j] != '"':
                if text[j] == "\\" and j + 1 < n:
                    out.append(text[j + 1])
                    j += 2
                else:
                    out.append(text[j])
                    j += 1
            if j >= n:
                raise SexprError(f"unterminated string at offset {i}")
            toks.append(("str", "".join(out)))
            i = j + 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in '()"':
                j += 1
            toks.append(("atom", text[i:j]))
            i = j
    return toks


def _read(toks: list, pos: int):
    if pos >= len(toks):
        raise SexprError("unexpected end of input")
    t = toks[pos]
    if t == "(":
        items = []
        pos += 1
        while pos < len(toks) and toks[pos] != ")":
            item, pos = _read(toks, pos)
            items.append(item)
        if pos >= len(toks):
            raise SexprError("missing closing paren")
        return ("list", items), pos + 1
    if t == ")":
        raise SexprError("unexpected ')'")
    return t, pos + 1


def _build_expr(node) -> Expr:
    if isinstance(node, tuple) and node[0] == "atom":
        name = node[1]
        if name in ANCHOR_OPS:
            return Expr(name)
        raise SexprError(f"bare atom {name!r} is not an anchor")
    if isinstance(node, tuple) and node[0] == "str":
        raise SexprError("bare string outside (str ...)")
    kind, items = node
    if not items or not (isinstance(items[0], tuple) and items[0][0] == "atom"):
        raise SexprError("expression must start with an operator atom")
    op = items[0][1]
    rest = items[1:]

    def atom(i):
        if i < len(rest) and isinstance(rest[i], tuple) and rest[i][0] == "atom":
            return rest[i][1]
        raise SexprError(f"{op}: expected atom payload")

    if op == "bool":
        v = atom(0)
        if v not in ("true", "false"):
            raise SexprError(f"bad bool {v!r}")
        return boolean(v == "true")
    if op == "int":
        return integer(int(atom(0)))
    if op == "float":
        return Expr("float", value=float(atom(0)))
    if op == "str":
        if len(rest) != 1 or rest[0][0] != "str":
            raise SexprError("(str ...) wants one quoted string")
        return string(rest[0][1])
    if op == "alias":
        vals = []
        for it in rest:
            if not (isinstance(it, tuple) and it[0] == "str"):
                raise SexprError("alias wants quoted strings")
            vals.append(it[1])
        if not vals:
            raise SexprError("alias wants a name")
        return Expr("alias", value=(vals[0], tuple(vals[1:])))

    value = None
    if op == "contains":
        value = atom(0)
        rest = rest[1:]
    elif op == "within":
        value = atom(0)
        rest = rest[1:]
    elif op in ("left", "right") and rest and isinstance(rest[0], tuple) and rest[0][0] == "atom" and rest[0][1] in WINDOW_UNITS:
        value = rest[0][1]
        rest = rest[1:]
    args = tuple(_build_expr(r) for r in rest)
    return Expr(op, args, value)


def from_sexpr(text: str) -> Expr:
    toks = _lex_sexpr(text)
    node, pos = _read(toks, 0)
    if pos != len(toks):
        raise SexprError("trailing input after expression")
    e = _build_expr(node)
    infer_type(e)
    return e


def lf_from_sexpr(text: str) -> LogicalForm:
    toks = _lex_sexpr(text)
    node, pos = _read(toks, 0)
    if pos != len(toks):
        raise SexprError("trailing input after logical form")
    if not (isinstance(node, tuple) and node[0] == "list"):
        raise SexprError("logical form must be a list")
    items = node[1]
    if len(items) != 3 or items[0] != ("atom", "lf"):
        raise SexprError("logical form must look like (lf <polarity> <condition>)")
    pol = int(items[1][1])
    cond = _build_expr(items[2])
    if infer_type(cond) != T_BOOL:
        raise LfTypeError("logical form condition must be boolean")
    return LogicalForm(pol, cond)


# ---------------------------------------------------------------------------
# human-readable rendering (workbench display only; not a contract)
# ---------------------------------------------------------------------------

_CMP_GLYPH = {"eq": "==", "ne": "!=", "lt": "<", "le": "<=", "gt": ">", "ge": ">="}


def describe(e: Expr) -> str:
    op = e.op
    if op == "arg_x":
        return "X"
    if op == "arg_y":
        return "Y"
    if op == "sentence":
        return "the sentence"
    if op == "bool":
        return "true" if e.value else "false"
    if op in ("int", "float"):
        return str(e.value)
    if op == "str":
        return repr(e.value)
    if op == "alias":
        return f"<{e.value[0]} words>"
    if op in ("and", "or"):
        return "(" + f" {op} ".join(describe(a) for a in e.args) + ")"
    if op == "not":
        return f"not {describe(e.args[0])}"
    if op in ("any", "all", "none"):
        return f"{op} of [" + ", ".join(describe(a) for a in e.args) + "]"
    if op in CMP_OPS:
        return f"{describe(e.args[0])} {_CMP_GLYPH[op]} {describe(e.args[1])}"
    if op == "contains":
        return f"{describe(e.args[1])} in {describe(e.args[0])} ({e.value})"
    if op in ("list", "set"):
        return "[" + ", ".join(describe(a) for a in e.args) + "]"
    if op in ("left", "right") and e.value is not None:
        k, unit = e.args[1], e.value
        return f"{op}({describe(e.args[0])}, {describe(k)} {unit})"
    if op == "within":
        return f"within({describe(e.args[0])}, {describe(e.args[1])}, {describe(e.args[2])} {e.value})"
    return f"{op}(" + ", ".join(describe(a) for a in e.args) + ")"


def describe_lf(lf: LogicalForm) -> str:
    sign = "+1" if lf.polarity > 0 else "-1"
    return f"label {sign} if {describe(lf.condition)}"
