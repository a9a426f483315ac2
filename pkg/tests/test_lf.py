import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from babble.lf import (
    ARG_X,
    ARG_Y,
    SENTENCE,
    Expr,
    LfTypeError,
    LogicalForm,
    boolean,
    from_sexpr,
    infer_type,
    integer,
    lf_from_sexpr,
    lf_to_sexpr,
    normalize,
    string,
    to_sexpr,
)

from genlf import random_bool, random_lf


def test_infer_type_basics():
    assert infer_type(boolean(True)) == "bool"
    assert infer_type(integer(3)) == "int"
    assert infer_type(string("hi")) == "str"
    assert infer_type(ARG_X) == "rgn"
    cond = Expr("and", (boolean(True), Expr("left", (ARG_X, ARG_Y))))
    assert infer_type(cond) == "bool"


def test_infer_type_rejects_bad_trees():
    with pytest.raises(LfTypeError):
        infer_type(Expr("and", (integer(1), boolean(True))))
    with pytest.raises(LfTypeError):
        infer_type(Expr("count", (boolean(True),)))
    with pytest.raises(LfTypeError):
        infer_type(Expr("contains", (SENTENCE, string("a")), "sometimes"))
    with pytest.raises(LfTypeError):
        infer_type(Expr("nonsense", ()))


def test_polarity_validated():
    with pytest.raises(Exception):
        LogicalForm(0, boolean(True))


def test_normalize_commutes_and():
    a = Expr("left", (ARG_X, ARG_Y))
    b = Expr("substring", (ARG_X, string("w")))
    assert normalize(Expr("and", (a, b))) == normalize(Expr("and", (b, a)))


def test_normalize_double_negation():
    a = Expr("left", (ARG_X, ARG_Y))
    assert normalize(Expr("not", (Expr("not", (a,)),))) == a


def test_normalize_flattens_nested_conjunction():
    a = Expr("left", (ARG_X, ARG_Y))
    b = Expr("right", (ARG_X, ARG_Y))
    c = boolean(True)
    left_nested = Expr("and", (Expr("and", (a, b)), c))
    right_nested = Expr("and", (a, Expr("and", (b, c))))
    assert normalize(left_nested) == normalize(right_nested)
    assert len(normalize(left_nested).args) == 3


def test_normalize_sorts_symmetric_pairs():
    d1 = Expr("word_distance", (ARG_X, ARG_Y))
    d2 = Expr("word_distance", (ARG_Y, ARG_X))
    assert normalize(d1) == normalize(d2)
    b1 = Expr("between", (ARG_Y, ARG_X))
    b2 = Expr("between", (ARG_X, ARG_Y))
    assert normalize(b1) == normalize(b2)


@settings(max_examples=150, deadline=None)
@given(st.integers(min_value=0, max_value=10**9))
def test_normalize_idempotent_on_random_forms(seed):
    rng = random.Random(seed)
    e = random_bool(rng, depth=3)
    once = normalize(e)
    assert normalize(once) == once


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=0, max_value=10**9))
def test_sexpr_round_trip_random(seed):
    rng = random.Random(seed)
    lf = random_lf(rng, depth=3)
    text = lf_to_sexpr(lf)
    back = lf_from_sexpr(text)
    assert back.polarity == lf.polarity
    assert back.condition == lf.condition
    assert lf_to_sexpr(back) == text


def test_sexpr_stable_format():
    cond = normalize(
        Expr(
            "and",
            (
                Expr("left", (ARG_X, ARG_Y)),
                Expr("eq", (Expr("word_distance", (ARG_X, ARG_Y)), integer(2))),
            ),
        )
    )
    lf = LogicalForm(1, cond)
    assert lf_to_sexpr(lf) == "(lf +1 (and (eq (int 2) (word_distance arg_x arg_y)) (left arg_x arg_y)))"


def test_sexpr_escapes_quotes():
    e = string('say "hi" \\ there')
    assert from_sexpr(to_sexpr(e)) == e


def test_window_and_contains_payload_round_trip():
    w = Expr("left", (ARG_X, integer(3)), "words")
    assert from_sexpr(to_sexpr(w)) == w
    c = Expr("contains", (SENTENCE, Expr("list", (string("a"), string("b")))), "none")
    assert from_sexpr(to_sexpr(c)) == c
    within = Expr("within", (ARG_X, ARG_Y, integer(5)), "chars")
    assert from_sexpr(to_sexpr(within)) == within


def test_from_sexpr_type_checks():
    with pytest.raises(Exception):
        lf_from_sexpr("(lf +1 (int 3))")
    with pytest.raises(Exception):
        from_sexpr("(and (bool true)")
