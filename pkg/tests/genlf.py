"""Seeded random generators for logical forms and examples, used by the
property tests (normalization preserves execution, perturbation edits one
node, filters agree with re-execution)."""

from __future__ import annotations

import random

from babble.corpus import Example
from babble.lf import ARG_X, ARG_Y, SENTENCE, Expr, boolean, integer, string

WORDS = ["alpha", "Beta", "gamma", "DELTA", "eps", "Zeta", "kappa", "mu"]
STR_POOL = ["wed", "his wife", "beta", "x1", ",", "kappa"]
TAGS = ["person", "location", "date", "number", "organization"]


def random_example(rng: random.Random, min_len: int = 4, max_len: int = 12) -> Example:
    n = rng.randint(min_len, max_len)
    tokens = [rng.choice(WORDS) for _ in range(n)]
    tags = ["none"] * n
    for k in range(n):
        if rng.random() < 0.25:
            tags[k] = rng.choice(TAGS)
    # two non-overlapping single-token spans
    a, b = rng.sample(range(n), 2)
    span_x = (min(a, b), min(a, b) + 1) if rng.random() < 0.5 else (max(a, b), max(a, b) + 1)
    other = b if span_x[0] == a else a
    span_y = (other, other + 1)
    return Example(
        id=f"r{rng.randint(0, 10**9)}",
        tokens=tuple(tokens),
        entity_tags=tuple(tags),
        span_x=span_x,
        span_y=span_y,
    )


def random_region(rng: random.Random, depth: int) -> Expr:
    choices = ["arg_x", "arg_y", "sentence"]
    if depth > 0:
        choices += ["between", "left", "right", "window", "filter"]
    pick = rng.choice(choices)
    if pick == "arg_x":
        return ARG_X
    if pick == "arg_y":
        return ARG_Y
    if pick == "sentence":
        return SENTENCE
    if pick == "between":
        return Expr("between", (random_region(rng, 0), random_region(rng, 0)))
    if pick in ("left", "right"):
        return Expr(pick, (random_region(rng, depth - 1),))
    if pick == "window":
        side = rng.choice(["left", "right"])
        unit = rng.choice(["words", "chars"])
        return Expr(side, (random_region(rng, depth - 1), integer(rng.randint(1, 6))), unit)
    test = random_test(rng)
    return Expr("filter", (random_region(rng, depth - 1), test))


def random_test(rng: random.Random) -> Expr:
    kind = rng.choice(["capital", "lower", "all_caps", "person", "location", "number",
                       "starts_with", "ends_with", "substring"])
    if kind in ("starts_with", "ends_with", "substring"):
        return Expr(kind, (string(rng.choice(STR_POOL)),))
    return Expr(kind)


def random_strlike(rng: random.Random) -> Expr:
    if rng.random() < 0.6:
        return string(rng.choice(STR_POOL))
    return rng.choice([ARG_X, ARG_Y])


def random_coll(rng: random.Random) -> Expr:
    op = rng.choice(["list", "set"])
    k = rng.randint(1, 3)
    return Expr(op, tuple(random_strlike(rng) for _ in range(k)))


def random_int_expr(rng: random.Random, depth: int) -> Expr:
    pick = rng.choice(["lit", "count", "dist", "occ", "inter"])
    if pick == "lit" or depth <= 0:
        return integer(rng.randint(0, 5))
    if pick == "count":
        return Expr("count", (random_region(rng, depth - 1),))
    if pick == "dist":
        op = rng.choice(["word_distance", "character_distance"])
        return Expr(op, (random_region(rng, 0), random_region(rng, 0)))
    if pick == "occ":
        return Expr("count", (random_strlike(rng), random_region(rng, depth - 1)))
    return Expr("count", (Expr("intersection", (random_coll(rng), random_region(rng, depth - 1))),))


def random_bool(rng: random.Random, depth: int) -> Expr:
    atoms = ["cmp", "contains", "tag", "case", "strtest", "within", "order", "boolean", "map"]
    combos = ["and", "or", "not", "any", "all", "none"]
    pick = rng.choice(atoms if depth <= 0 else atoms + combos * 2)
    if pick == "boolean":
        return boolean(rng.random() < 0.5)
    if pick == "cmp":
        op = rng.choice(["eq", "ne", "lt", "le", "gt", "ge"])
        return Expr(op, (random_int_expr(rng, depth - 1), random_int_expr(rng, depth - 1)))
    if pick == "contains":
        mode = rng.choice(["any", "all", "none"])
        container = random_region(rng, depth - 1)
        needle = rng.choice([random_coll(rng), random_strlike(rng), random_region(rng, 0)])
        return Expr("contains", (container, needle), mode)
    if pick == "tag":
        return Expr(rng.choice(TAGS), (random_region(rng, depth - 1),))
    if pick == "case":
        op = rng.choice(["lower", "upper", "capital", "all_caps"])
        return Expr(op, (random_strlike(rng),))
    if pick == "strtest":
        op = rng.choice(["starts_with", "ends_with", "substring"])
        return Expr(op, (random_strlike(rng), random_strlike(rng)))
    if pick == "within":
        unit = rng.choice(["words", "chars"])
        return Expr(
            "within", (random_region(rng, 0), random_region(rng, 0), integer(rng.randint(1, 9))), unit
        )
    if pick == "order":
        op = rng.choice(["left", "right"])
        return Expr(op, (random_region(rng, 0), random_region(rng, 0)))
    if pick == "map":
        return Expr("any", (Expr("map", (random_test(rng), random_region(rng, depth - 1))),))
    if pick == "not":
        return Expr("not", (random_bool(rng, depth - 1),))
    if pick in ("and", "or"):
        k = rng.randint(2, 3)
        return Expr(pick, tuple(random_bool(rng, depth - 1) for _ in range(k)))
    k = rng.randint(1, 3)
    return Expr(pick, tuple(random_bool(rng, depth - 1) for _ in range(k)))


def random_lf(rng: random.Random, depth: int = 3):
    from babble.lf import LogicalForm

    return LogicalForm(rng.choice([-1, 1]), random_bool(rng, depth))
