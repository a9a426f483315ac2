import math
import random

import pytest

from babble.corpus import Example
from babble.execution import (
    EvalContext,
    coverage,
    evaluate,
    execute,
    perturb,
    signature,
)
from babble.lf import (
    ARG_X,
    ARG_Y,
    SENTENCE,
    Expr,
    LogicalForm,
    boolean,
    infer_type,
    integer,
    normalize,
    string,
)

from genlf import random_example, random_lf
from oracles import tree_diff_count


def ex(tokens, tags=None, span_x=(0, 1), span_y=None):
    tokens = tuple(tokens)
    if tags is None:
        tags = ("none",) * len(tokens)
    if span_y is None:
        span_y = (len(tokens) - 1, len(tokens))
    return Example(id="t", tokens=tokens, entity_tags=tuple(tags), span_x=span_x, span_y=span_y)


SIMPLE = ex(
    ["Ann", "could", "produce", "a", "Bob"],
    tags=["person", "none", "none", "none", "person"],
)


def test_tautology():
    lf = LogicalForm(1, boolean(True))
    assert execute(lf, SIMPLE) == 1
    assert execute(LogicalForm(-1, boolean(True)), SIMPLE) == -1


def test_false_condition_abstains():
    lf = LogicalForm(1, boolean(False))
    assert execute(lf, SIMPLE) == 0


def test_sentence_substring_family():
    # negative-class rule firing on token matches, abstaining otherwise
    cond = Expr(
        "contains",
        (SENTENCE, Expr("list", (string("mRNA"), string("DNA"), string("RNA")))),
        "any",
    )
    lf = LogicalForm(-1, cond)
    with_hit = ex(["the", "mRNA", "binds", "x", "y"])
    without = ex(["the", "protein", "binds", "x", "y"])
    assert execute(lf, with_hit) == -1
    assert execute(lf, without) == 0


def test_word_distance_with_direction():
    cond = Expr(
        "and",
        (
            Expr("left", (ARG_X, ARG_Y)),
            Expr("eq", (Expr("word_distance", (ARG_X, ARG_Y)), integer(2))),
        ),
    )
    lf = LogicalForm(1, cond)
    # [X, a, b, Y]: two tokens strictly between
    assert execute(lf, ex(["X", "a", "b", "Y"])) == 1
    # Y before X: direction fails
    assert execute(lf, ex(["Y", "a", "X"], span_x=(2, 3), span_y=(0, 1))) == 0


def test_execute_type_error_on_bad_tree():
    from babble.execution import ExecutionError

    bad = LogicalForm(1, Expr("count", (boolean(True),)))
    with pytest.raises(ExecutionError):
        execute(bad, SIMPLE)


def test_between_semantics():
    ctx = EvalContext.from_example(ex(["X", "a", "b", "Y"]))
    region = evaluate(Expr("between", (ARG_X, ARG_Y)), ctx)
    assert region == (1, 2)
    # adjacent spans: empty between
    ctx2 = EvalContext.from_example(ex(["X", "Y"]))
    assert evaluate(Expr("between", (ARG_X, ARG_Y)), ctx2) == ()
    # order-insensitive
    ctx3 = EvalContext.from_example(ex(["Y", "a", "X"], span_x=(2, 3), span_y=(0, 1)))
    assert evaluate(Expr("between", (ARG_X, ARG_Y)), ctx3) == (1,)


def test_left_right_regions_and_windows():
    ctx = EvalContext.from_example(ex(["a", "b", "X", "c", "d"], span_x=(2, 3), span_y=(4, 5)))
    assert evaluate(Expr("left", (ARG_X,)), ctx) == (0, 1)
    assert evaluate(Expr("right", (ARG_X,)), ctx) == (3, 4)
    assert evaluate(Expr("left", (ARG_X, integer(1)), "words"), ctx) == (1,)
    assert evaluate(Expr("right", (ARG_X, integer(1)), "words"), ctx) == (3,)


def test_character_window():
    # tokens: "aa X bb": left window of 1 char cannot reach "aa" (gap 1 char
    # is the space, needs gap < k)
    e = ex(["aa", "X", "bb"], span_x=(1, 2), span_y=(2, 3))
    ctx = EvalContext.from_example(e)
    assert evaluate(Expr("left", (ARG_X, integer(1)), "chars"), ctx) == ()
    assert evaluate(Expr("left", (ARG_X, integer(2)), "chars"), ctx) == (0,)


def test_word_distance_adjacent_is_zero():
    ctx = EvalContext.from_example(ex(["X", "Y"]))
    assert evaluate(Expr("word_distance", (ARG_X, ARG_Y)), ctx) == 0


def test_character_distance_counts_spaces():
    # "X Y": boundary-to-boundary gap is the single space
    ctx = EvalContext.from_example(ex(["X", "Y"]))
    assert evaluate(Expr("character_distance", (ARG_X, ARG_Y)), ctx) == 1
    ctx2 = EvalContext.from_example(ex(["X", "ab", "Y"]))
    assert evaluate(Expr("character_distance", (ARG_X, ARG_Y)), ctx2) == 4


def test_distance_symmetry():
    rng = random.Random(7)
    for _ in range(50):
        e = random_example(rng)
        ctx = EvalContext.from_example(e)
        for op in ("word_distance", "character_distance"):
            d1 = evaluate(Expr(op, (ARG_X, ARG_Y)), ctx)
            d2 = evaluate(Expr(op, (ARG_Y, ARG_X)), ctx)
            assert d1 == d2


def test_position_duality_left_right():
    rng = random.Random(8)
    for _ in range(80):
        e = random_example(rng)
        ctx = EvalContext.from_example(e)
        l = evaluate(Expr("left", (ARG_X, ARG_Y)), ctx)
        r = evaluate(Expr("right", (ARG_Y, ARG_X)), ctx)
        assert l == r


def test_between_swap_invariance():
    rng = random.Random(9)
    for _ in range(50):
        e = random_example(rng)
        ctx = EvalContext.from_example(e)
        b1 = evaluate(Expr("between", (ARG_X, ARG_Y)), ctx)
        b2 = evaluate(Expr("between", (ARG_Y, ARG_X)), ctx)
        assert b1 == b2


def test_case_predicates_partition_alphabetic_tokens():
    for token in ["word", "Word", "WORD", "WoRd"]:
        e = ex([token, "y"])
        ctx = EvalContext.from_example(e)
        lower = evaluate(Expr("lower", (ARG_X,)), ctx)
        caps = evaluate(Expr("all_caps", (ARG_X,)), ctx)
        capital = evaluate(Expr("capital", (ARG_X,)), ctx)
        if token == "word":
            assert lower and not caps and not capital
        elif token == "WORD":
            assert caps and not lower
        elif token == "Word":
            assert capital and not lower and not caps
        else:  # WoRd: capitalized but neither lower nor all caps
            assert capital and not lower and not caps
    # upper is a synonym of all_caps
    e = ex(["WORD", "y"])
    ctx = EvalContext.from_example(e)
    assert evaluate(Expr("upper", (ARG_X,)), ctx) == evaluate(Expr("all_caps", (ARG_X,)), ctx)


def test_string_tests_case_insensitive():
    e = ex(["Cardiogram", "y"])
    ctx = EvalContext.from_example(e)
    assert evaluate(Expr("starts_with", (ARG_X, string("cardio"))), ctx)
    assert evaluate(Expr("ends_with", (ARG_X, string("GRAM"))), ctx)
    assert evaluate(Expr("substring", (ARG_X, string("diog"))), ctx)


def test_tag_predicates_scoped_to_region():
    e = ex(
        ["X", "met", "Carol", "in", "Y"],
        tags=["person", "none", "person", "none", "person"],
    )
    ctx = EvalContext.from_example(e)
    assert evaluate(Expr("person", (Expr("between", (ARG_X, ARG_Y)),)), ctx)
    assert not evaluate(Expr("location", (SENTENCE,)), ctx)


def test_count_and_filter():
    e = ex(["X", "Big", "small", "Tall", "Y"])
    ctx = EvalContext.from_example(e)
    between = Expr("between", (ARG_X, ARG_Y))
    assert evaluate(Expr("count", (between,)), ctx) == 3
    capitals = Expr("filter", (between, Expr("capital")))
    assert evaluate(Expr("count", (capitals,)), ctx) == 2


def test_occurrence_count():
    e = ex(["X", ",", "a", ",", "Y"])
    ctx = EvalContext.from_example(e)
    n = evaluate(Expr("count", (string(","), Expr("between", (ARG_X, ARG_Y)))), ctx)
    assert n == 2


def test_contains_modes():
    e = ex(["X", "alpha", "beta", "Y"])
    ctx = EvalContext.from_example(e)
    between = Expr("between", (ARG_X, ARG_Y))
    both = Expr("set", (string("alpha"), string("beta")))
    one = Expr("list", (string("alpha"), string("zeta")))
    assert evaluate(Expr("contains", (between, both), "all"), ctx)
    assert evaluate(Expr("contains", (between, one), "any"), ctx)
    assert not evaluate(Expr("contains", (between, one), "all"), ctx)
    assert not evaluate(Expr("contains", (between, both), "none"), ctx)


def test_contains_does_not_match_across_gaps():
    # non-adjacent region runs must not let substrings bridge the gap
    e = ex(["his", "x", "wife", "y"], span_x=(1, 2), span_y=(3, 4))
    ctx = EvalContext.from_example(e)
    scattered = Expr("filter", (SENTENCE, Expr("lower")))
    # "his" and "wife" are both lowercase but separated by x in the sentence
    assert not evaluate(Expr("contains", (scattered, string("his wife")), "any"), ctx)


def test_contains_region_needle_overlap():
    e = ex(["X", "a", "Y"])
    ctx = EvalContext.from_example(e)
    inside = Expr("contains", (Expr("between", (ARG_X, ARG_Y)), ARG_X), "any")
    assert not evaluate(inside, ctx)
    whole = Expr("contains", (SENTENCE, ARG_X), "any")
    assert evaluate(whole, ctx)


def test_intersection_counts_distinct_members():
    e = ex(["X", "alpha", "beta", "alpha", "Y"])
    ctx = EvalContext.from_example(e)
    coll = Expr("list", (string("alpha"), string("beta"), string("zeta")))
    inter = Expr("intersection", (coll, Expr("between", (ARG_X, ARG_Y))))
    assert evaluate(Expr("count", (inter,)), ctx) == 2


def test_within_strict():
    e = ex(["X", "a", "b", "Y"])
    ctx = EvalContext.from_example(e)
    assert evaluate(Expr("within", (ARG_X, ARG_Y, integer(3)), "words"), ctx)
    assert not evaluate(Expr("within", (ARG_X, ARG_Y, integer(2)), "words"), ctx)


def test_map_any():
    e = ex(["X", "prefix", "other", "Y"])
    ctx = EvalContext.from_example(e)
    m = Expr("any", (Expr("map", (Expr("starts_with", (string("pre"),)), Expr("between", (ARG_X, ARG_Y)))),))
    assert evaluate(m, ctx)


def test_comparison_coercion():
    e = ex(["12", "y"])
    ctx = EvalContext.from_example(e)
    assert evaluate(Expr("gt", (ARG_X, integer(3))), ctx)
    # non-numeric order comparison is false; eq falls back to string equality
    e2 = ex(["abc", "y"])
    ctx2 = EvalContext.from_example(e2)
    assert not evaluate(Expr("gt", (ARG_X, integer(3))), ctx2)
    assert evaluate(Expr("eq", (ARG_X, string("abc"))), ctx2)


# ---------------------------------------------------------------------------
# signatures and coverage
# ---------------------------------------------------------------------------


def test_signature_matches_re_execution():
    rng = random.Random(21)
    examples = [random_example(rng) for _ in range(20)]
    for _ in range(20):
        lf = random_lf(rng)
        sig = signature(lf, examples)
        assert sig == tuple(execute(lf, e) for e in examples)


def test_signature_empty():
    lf = LogicalForm(1, boolean(True))
    assert signature(lf, []) == ()


def test_tautology_signature():
    lf = LogicalForm(1, boolean(True))
    examples = [SIMPLE] * 5
    assert signature(lf, examples) == (1,) * 5


def test_coverage():
    assert coverage(()) == 0.0
    assert coverage((0, 0, 0)) == 0.0
    assert coverage((1, -1, 1)) == 1.0
    assert coverage((1, 0, -1, 0)) == 0.5


# ---------------------------------------------------------------------------
# normalization preserves behavior
# ---------------------------------------------------------------------------


def test_normalize_preserves_execution():
    rng = random.Random(31)
    for _ in range(200):
        lf = random_lf(rng)
        e = random_example(rng)
        normalized = LogicalForm(lf.polarity, normalize(lf.condition))
        assert execute(lf, e) == execute(normalized, e)


# ---------------------------------------------------------------------------
# perturbations
# ---------------------------------------------------------------------------


def test_perturb_single_bool_node():
    lf = LogicalForm(1, boolean(True))
    variants = perturb(lf, budget=10)
    assert variants == [LogicalForm(1, boolean(False))]


def test_perturb_integer_neighbors():
    cond = Expr("eq", (Expr("word_distance", (ARG_X, ARG_Y)), integer(2)))
    lf = LogicalForm(1, cond)
    variants = perturb(lf, budget=50)
    conds = {v.condition for v in variants}
    for k in (1, 3):
        assert Expr("eq", (Expr("word_distance", (ARG_X, ARG_Y)), integer(k))) in conds


def test_perturb_never_returns_original_and_diffs_one_node():
    rng = random.Random(41)
    checked = 0
    for _ in range(60):
        lf = random_lf(rng)
        for v in perturb(lf, budget=20):
            assert v.condition != lf.condition
            assert tree_diff_count(lf.condition, v.condition) == 1
            assert infer_type(v.condition) == "bool"
            checked += 1
    assert checked > 100


def test_perturb_string_swaps_within_form():
    cond = Expr(
        "and",
        (
            Expr("substring", (ARG_X, string("alpha"))),
            Expr("substring", (ARG_Y, string("beta"))),
        ),
    )
    variants = perturb(LogicalForm(1, cond), budget=100)
    conds = {v.condition for v in variants}
    swapped = Expr(
        "and",
        (
            Expr("substring", (ARG_X, string("beta"))),
            Expr("substring", (ARG_Y, string("beta"))),
        ),
    )
    assert swapped in conds


def test_perturb_budget_and_determinism():
    rng = random.Random(51)
    lf = random_lf(rng, depth=3)
    a = perturb(lf, budget=7)
    b = perturb(lf, budget=7)
    assert a == b
    assert len(a) <= 7
    with pytest.raises(ValueError):
        perturb(lf, budget=0)
