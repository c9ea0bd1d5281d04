from __future__ import annotations

import sys
from fractions import Fraction

import pytest
from hypothesis import strategies as st

from ciquant.brackets import BracketTable
from ciquant.expr import Expr, Parity, Symbol
from ciquant.scalar import Scalar

T = Symbol("t", "time")
X = Symbol("x", "integration-constant")
Y = Symbol("y", "integration-constant")
C = Symbol("c", "integration-constant", Parity.ODD)
D = Symbol("d", "integration-constant", Parity.ODD)
E = Symbol("e", "integration-constant", Parity.ODD)
W = Symbol("w", "parameter", value=0.7)

EVEN = (X, Y)
ODD = (C, D, E)
CONSTANTS = EVEN + ODD
TABLE_SYMBOLS = {s.name: s for s in (T, W) + CONSTANTS}


def mixed_table(values: dict[tuple[str, str], Expr | int] | None = None) -> BracketTable:
    """Graded constant table over x, y (even) and c, d, e (odd).

    Default: {x, y} = 1, {c, d} = {d, c} = -i, {e, e} = 1, everything else 0.
    """
    if values is None:
        values = {("x", "y"): 1, ("y", "x"): -1, ("c", "d"): Scalar(0, -1), ("d", "c"): Scalar(0, -1), ("e", "e"): 1}
    idx = {s.name: k for k, s in enumerate(CONSTANTS)}
    n = len(CONSTANTS)
    vals = {(k, l): Expr() for k in range(n) for l in range(n)}
    for (a, b), v in values.items():
        vals[(idx[a], idx[b])] = v if isinstance(v, Expr) else Expr.scalar(v)
    return BracketTable(CONSTANTS, vals, n_unknowns=n * n)


@pytest.fixture
def table():
    return mixed_table()


small_ints = st.integers(-4, 4)
scalars = st.builds(lambda a, b, d: Scalar(Fraction(a, d), Fraction(b, d)), small_ints, small_ints, st.integers(1, 3))


@st.composite
def graded_monomials(draw, parity: int):
    """A monomial in x, y, c, d, e, t, w of definite parity."""
    coeff = draw(scalars.filter(bool))
    e = Expr.scalar(coeff)
    for s in (X, Y, W):
        p = draw(st.integers(0, 2))
        if p:
            e = e * Expr.symbol(s, p)
    if draw(st.booleans()):
        e = e * Expr.exp(Expr.scalar(Scalar(0, draw(st.integers(-2, 2)))) * Expr.symbol(T))
    odds = draw(st.lists(st.sampled_from(ODD), unique=True, max_size=3))
    if len(odds) % 2 != parity:
        remaining = [o for o in ODD if o not in odds]
        if remaining:
            odds.append(draw(st.sampled_from(remaining)))
        else:
            odds.pop()
    for o in odds:
        e = e * Expr.symbol(o)
    return e


@st.composite
def graded_exprs(draw, parity: int | None = None):
    """Sum of up to three monomials sharing one parity (0 even, 1 odd)."""
    if parity is None:
        parity = draw(st.integers(0, 1))
    terms = draw(st.lists(graded_monomials(parity), min_size=1, max_size=3))
    out = Expr()
    for t in terms:
        out = out + t
    return out, parity


@st.composite
def expression_text(draw, depth: int = 3):
    """Random source text over the test symbol table."""
    names = list(TABLE_SYMBOLS)
    if depth == 0 or draw(st.integers(0, 3)) == 0:
        kind = draw(st.sampled_from(["num", "sym", "i", "frac"]))
        if kind == "num":
            return str(draw(st.integers(0, 9)))
        if kind == "frac":
            return f"{draw(st.integers(1, 9))}/{draw(st.integers(1, 9))}"
        if kind == "i":
            return "i"
        return draw(st.sampled_from(names))
    op = draw(st.sampled_from(["+", "-", "*", "neg", "pow", "trig", "paren", "div"]))
    sub = expression_text(depth=depth - 1)
    if op in "+-*":
        return f"{draw(sub)} {op} {draw(sub)}"
    if op == "neg":
        return f"-({draw(sub)})"
    if op == "pow":
        base = draw(st.sampled_from(["x", "y", "w", "t", "(x + y)"]))
        return f"{base}^{draw(st.integers(0, 3))}"
    if op == "div":
        return f"({draw(sub)})/{draw(st.sampled_from(['2', 'w', 'x^2', '3*y']))}"
    if op == "trig":
        f = draw(st.sampled_from(["sin", "cos", "exp"]))
        arg = draw(st.sampled_from(["t", "w*t", "-2*t", "i*t", "t + w"]))
        return f"{f}({arg})"
    return f"({draw(sub)})"


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
