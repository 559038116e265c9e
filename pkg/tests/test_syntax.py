import pytest
from hypothesis import given, settings, strategies as st

from goiqc.corpus import TermGenerator
from goiqc.errors import ParseError, UnknownConstant
from goiqc.syntax import (
    BIT,
    QBIT,
    UNIT,
    App,
    BoolLit,
    Const,
    Ite,
    Lam,
    LetPair,
    Lolli,
    Pair,
    Star,
    Tensor,
    Var,
    atoms,
    free_vars,
    parse_program,
    parse_term,
    parse_type,
    polarity_in,
    pretty,
    pretty_type,
)


def test_application_is_left_associative():
    assert parse_term("f x y") == App(App(Var("f"), Var("x")), Var("y"))


def test_lambda_with_several_binders_is_curried():
    assert parse_term(r"\f g. f g") == Lam("f", Lam("g", App(Var("f"), Var("g"))))


def test_constants_and_literals():
    t = parse_term("meas (H (new (one *)))")
    assert t == App(Const("meas"), App(Const("H"), App(Const("new"), App(Const("one"), Star()))))
    assert parse_term("if tt then ff else tt") == Ite(BoolLit(True), BoolLit(False), BoolLit(True))


def test_let_pair_and_triple_sugar():
    t = parse_term("let (a, b) = (x, y, z) in a")
    assert t == LetPair("a", "b", Pair(Var("x"), Pair(Var("y"), Var("z"))), Var("a"))


def test_let_binding_is_an_applied_lambda():
    assert parse_term("let x = tt in x") == App(Lam("x", Var("x")), BoolLit(True))


def test_comments_are_ignored():
    assert parse_term("-- a comment\n  tt -- trailing") == BoolLit(True)


def test_types_parse_with_right_nested_arrows():
    assert parse_type("qbit -o qbit -o bit") == Lolli(QBIT, Lolli(QBIT, BIT))
    assert parse_type("(qbit -o qbit) * 1") == Tensor(Lolli(QBIT, QBIT), UNIT)


@pytest.mark.parametrize("text", ["(x", r"\. x", "let (a) = x in a", "if x then y", "x )"])
def test_malformed_terms_are_located(text):
    with pytest.raises(ParseError) as info:
        parse_term(text)
    assert info.value.line >= 1 and info.value.column >= 1


def test_unknown_capitalized_constant():
    with pytest.raises(UnknownConstant):
        parse_term("FOO x")


def test_program_with_context_header():
    ctx, t = parse_program("context q : qbit, b : bit;\n(q, b)")
    assert ctx == {"q": QBIT, "b": BIT}
    assert free_vars(t) == {"q", "b"}


def test_polarity_of_atoms():
    t = parse_type("(qbit -o qbit) -o bit")
    signs = [polarity_in(t, p) for p, _ in atoms(t)]
    assert signs == [1, -1, 1]


def test_pretty_type_round_trips():
    for text in ["bit", "qbit * bit", "(qbit -o qbit) -o qbit", "qbit -o qbit * qbit", "1"]:
        t = parse_type(text)
        assert parse_type(pretty_type(t)) == t


@settings(max_examples=150, deadline=None)
@given(st.integers(min_value=0, max_value=10 ** 6))
def test_pretty_then_parse_is_identity_on_generated_terms(seed):
    t = TermGenerator(seed).term()
    assert parse_term(pretty(t)) == t
