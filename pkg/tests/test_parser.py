"""Concrete syntax: parsing, printing, and the round-trip property."""

import pytest
from hypothesis import given, strategies as st

import randml.syntax as S
from randml.parser import ParseError, parse, parse_program
from randml.printer import print_expr


NAMES = ["x", "y", "z", "f", "acc'"]


def exprs():
    leaves = st.one_of(
        st.integers(-9, 99).map(S.Lit),
        st.sampled_from([S.TRUE, S.FALSE, S.UNIT]),
        st.sampled_from(NAMES).map(S.Var),
    )

    def extend(inner):
        unary = st.sampled_from(
            [S.Fst, S.Snd, S.Inl, S.Inr, S.Alloc, S.Load, S.AllocTape,
             S.Pack]
        )
        return st.one_of(
            st.builds(S.App, inner, inner),
            st.builds(lambda op, l, r: S.BinOp(op, l, r),
                      st.sampled_from(S.BINOPS), inner, inner),
            st.builds(S.If, inner, inner, inner),
            st.builds(S.Pair, inner, inner),
            st.builds(lambda c, e: c(e), unary, inner),
            st.builds(S.Case, inner, st.sampled_from(NAMES), inner,
                      st.sampled_from(NAMES), inner),
            st.builds(S.Store, inner, inner),
            st.builds(S.Rand, inner),
            st.builds(S.Rand, inner, inner),
            st.builds(S.Rec, st.sampled_from(NAMES + ["_"]),
                      st.sampled_from(NAMES), inner),
            st.builds(S.Unpack, inner, st.sampled_from(NAMES), inner),
        )

    return st.recursive(leaves, extend, max_leaves=12)


@given(exprs())
def test_print_parse_round_trip(e):
    assert parse(print_expr(e)) == e


@given(exprs())
def test_reprint_is_stable(e):
    text = print_expr(e)
    assert print_expr(parse(text)) == text


CASES = [
    # precedence and associativity
    ("1 + 2 * 3", S.BinOp("+", S.Lit(1), S.BinOp("*", S.Lit(2), S.Lit(3)))),
    ("1 - 2 - 3", S.BinOp("-", S.BinOp("-", S.Lit(1), S.Lit(2)), S.Lit(3))),
    ("f x y", S.App(S.App(S.Var("f"), S.Var("x")), S.Var("y"))),
    ("10 div 3 mod 2",
     S.BinOp("mod", S.BinOp("div", S.Lit(10), S.Lit(3)), S.Lit(2))),
    # sugar
    ("fun x -> x", S.Rec("_", "x", S.Var("x"))),
    ("let x = 1 in x", S.App(S.Rec("_", "x", S.Var("x")), S.Lit(1))),
    ("1; 2", S.App(S.Rec("_", "_", S.Lit(2)), S.Lit(1))),
    ("!r", S.Load(S.Var("r"))),
    ("r <- 1", S.Store(S.Var("r"), S.Lit(1))),
    ("()", S.UNIT),
    ("(1, true)", S.Pair(S.Lit(1), S.TRUE)),
    # rand, labeled and applied
    ("rand 5", S.Rand(S.Lit(5))),
    ("rand b @ l", S.Rand(S.Var("b"), S.Var("l"))),
    ("rand b l", S.App(S.Rand(S.Var("b")), S.Var("l"))),
]


@pytest.mark.parametrize("text,expected", CASES, ids=[c[0] for c in CASES])
def test_concrete_cases(text, expected):
    assert parse(text) == expected


def test_match_is_case_sugar():
    e = parse("match e with inl x -> 1 | inr y -> 2 end")
    assert e == S.Case(S.Var("e"), "x", S.Lit(1), "y", S.Lit(2))


def test_match_is_an_atom():
    # closed form: usable as an operand without parentheses
    e = parse("match v with inl x -> 1 | inr y -> 2 end + 10")
    assert isinstance(e, S.BinOp) and e.op == "+"


def test_for_loop_desugars_and_round_trips():
    e = parse("for i = 0 to 3 do r <- !r + i done; !r")
    assert parse(print_expr(e)) == e
    assert isinstance(e, S.App)  # sequencing applies a thunked load


def test_let_rec():
    e = parse("let rec go n = if n = 0 then 0 else go (n - 1) in go 5")
    assert isinstance(e, S.App)
    assert isinstance(e.fn, S.Rec)
    fn = e.arg
    assert isinstance(fn, S.Rec) and fn.fname == "go" and fn.arg == "n"


def test_comments_and_whitespace():
    assert parse("# a line comment\n 1 + 2 # trailing\n") == \
        S.BinOp("+", S.Lit(1), S.Lit(2))


def test_negative_literals():
    assert parse("-3") == S.Lit(-3)
    assert parse("2 * -3") == S.BinOp("*", S.Lit(2), S.Lit(-3))
    # in argument position a bare minus is subtraction, as in OCaml
    assert parse("f - 1") == S.BinOp("-", S.Var("f"), S.Lit(1))
    assert parse("f (-1)") == S.App(S.Var("f"), S.Lit(-1))


def test_parse_program_defs_and_main():
    defs, main = parse_program(
        "let one = 1;;\nlet two = one + one;;\ntwo + 1"
    )
    assert set(defs) == {"one", "two"}
    assert defs["one"] == S.Lit(1)
    assert main == S.BinOp("+", S.Var("two"), S.Lit(1))


def test_parse_program_without_main():
    defs, main = parse_program("let f = fun x -> x;;")
    assert main is None and set(defs) == {"f"}


@pytest.mark.parametrize("bad", [
    "", "let x = 1", "1 +", "match x with inl a -> 1 end",
    "fun -> 1", "(1", "1)", "let 3 = x in x", "rand",
])
def test_parse_errors(bad):
    with pytest.raises(ParseError):
        parse(bad)


def test_unbound_variable_check():
    e = parse("fun x -> y")
    with pytest.raises(S.UnboundVariableError):
        S.check_closed(e)
    S.check_closed(parse("fun x -> x"))


class TestSubstitution:
    def test_requires_value(self):
        with pytest.raises(ValueError):
            S.subst(S.Var("x"), "x", S.BinOp("+", S.Lit(1), S.Lit(1)))

    def test_shadowing(self):
        e = parse("fun x -> x + y")
        out = S.subst(e, "x", S.Lit(7))
        assert out == e  # binder shadows

    def test_capture_avoidance(self):
        # substituting a value with a free x under a binder named x must
        # rename the binder
        v = parse("fun z -> x")  # open value with free x
        e = parse("fun x -> f")
        out = S.subst(e, "f", v)
        assert "x" in out.fv
        assert isinstance(out, S.Rec) and out.arg != "x"

    def test_plain_substitution(self):
        e = parse("x + x * y")
        assert S.subst(e, "x", S.Lit(2)) == parse("2 + 2 * y")
