import pytest
from hypothesis import given, settings

from ciquant.expr import Expr
from ciquant.parser import ParseError, UndeclaredSymbolError, parse, parse_ast, tokenize
from ciquant.scalar import I

from conftest import TABLE_SYMBOLS, T, W, X, Y, expression_text


def p(text):
    return parse(text, TABLE_SYMBOLS)


def test_precedence():
    assert p("-x^2") == -(Expr.symbol(X, 2))
    assert p("x + y*x") == Expr.symbol(X) + Expr.symbol(Y) * Expr.symbol(X)
    assert p("x/2/2") == Expr.symbol(X) / 4


def test_decimal_is_exact():
    assert p("0.25*x") == Expr.symbol(X) / 4


def test_cos_to_exponentials():
    e = p("x*cos(t) + y*sin(t)")
    assert len(e) == 4
    assert str(e).count("exp(") == 4
    assert p("cos(t)^2 + sin(t)^2") == Expr.scalar(1)


def test_negative_exponent_forms():
    assert p("w^-2") == p("w^(-2)") == 1 / (Expr.symbol(W) * Expr.symbol(W))


def test_i_is_imaginary_unit():
    assert p("i*i") == Expr.scalar(-1)
    assert p("exp(i*t)") == Expr.exp(Expr.scalar(I) * Expr.symbol(T))


@pytest.mark.parametrize(
    "bad",
    ["", "x +", "(x", "x)", "x ^ y", "x ^ 1.5", "2 $ x", "sin x", "x y"],
)
def test_malformed(bad):
    with pytest.raises(ParseError):
        p(bad)


def test_undeclared():
    with pytest.raises(UndeclaredSymbolError):
        p("x + q")


def test_ast_shape():
    assert parse_ast("-a^2") == ("neg", ("pow", ("sym", "a"), 2))
    assert [k for k, _ in tokenize("sin(t_1')")] == ["ident", "op", "ident", "op"]


@settings(max_examples=1000, deadline=None)
@given(expression_text())
def test_round_trip(text):
    e = p(text)
    printed = str(e)
    again = p(printed)
    assert again == e
    assert str(again) == printed
