"""Recursive-descent parser for the plain-text expression grammar.

    expr     := term (("+" | "-") term)*
    term     := unary (("*" | "/") unary)*
    unary    := ("-" | "+") unary | power
    power    := atom ("^" exponent)?
    exponent := ["-"] INT | "(" ["-"] INT ")"
    atom     := NUMBER | "i" | IDENT | FUNC "(" expr ")" | "(" expr ")"
    FUNC     := "sin" | "cos" | "exp"

Parsing goes through a small tuple AST so that the same tree can be
evaluated by other backends (see :mod:`ciquant.exterior`).
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Mapping

from .expr import Expr, ExprError, Symbol
from .scalar import I, Scalar

FUNCTIONS = ("sin", "cos", "exp")
RESERVED = set(FUNCTIONS) | {"i"}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d+)?)|(?P<ident>[A-Za-z_][A-Za-z0-9_']*)|(?P<op>[-+*/^()]))"
)


class ParseError(ExprError):
    pass


class UndeclaredSymbolError(ParseError):
    pass


def tokenize(text: str) -> list[tuple[str, str]]:
    pos = 0
    out = []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos:].strip()[:1]!r} at {pos} in {text!r}")
        kind = m.lastgroup
        out.append((kind, m.group(kind)))
        pos = m.end()
    return out


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None)

    def take(self, value=None):
        tok = self.peek()
        if tok[0] is None:
            raise ParseError(f"unexpected end of input in {self.text!r}")
        if value is not None and tok[1] != value:
            raise ParseError(f"expected {value!r}, got {tok[1]!r} in {self.text!r}")
        self.i += 1
        return tok

    def parse(self):
        if not self.toks:
            raise ParseError("empty expression")
        node = self.expr()
        if self.i != len(self.toks):
            raise ParseError(f"trailing input {self.toks[self.i][1]!r} in {self.text!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            node = ("add" if op == "+" else "sub", node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            node = ("mul" if op == "*" else "div", node, self.unary())
        return node

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            return ("neg", self.unary())
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        node = self.atom()
        if self.peek()[1] == "^":
            self.take()
            node = ("pow", node, self.exponent())
        return node

    def exponent(self) -> int:
        paren = self.peek()[1] == "("
        if paren:
            self.take()
        sign = 1
        if self.peek()[1] == "-":
            self.take()
            sign = -1
        kind, val = self.take()
        if kind != "num" or "." in val:
            raise ParseError(f"exponent must be an integer, got {val!r}")
        if paren:
            self.take(")")
        return sign * int(val)

    def atom(self):
        kind, val = self.take()
        if kind == "num":
            return ("num", Scalar(Fraction(val)))
        if kind == "ident":
            if val == "i":
                return ("num", I)
            if val in FUNCTIONS:
                self.take("(")
                arg = self.expr()
                self.take(")")
                return ("call", val, arg)
            return ("sym", val)
        if val == "(":
            node = self.expr()
            self.take(")")
            return node
        raise ParseError(f"unexpected token {val!r} in {self.text!r}")


def parse_ast(text: str):
    return _Parser(text).parse()


def ast_symbols(node) -> set[str]:
    kind = node[0]
    if kind == "sym":
        return {node[1]}
    if kind == "num":
        return set()
    if kind in ("neg",):
        return ast_symbols(node[1])
    if kind == "pow":
        return ast_symbols(node[1])
    if kind == "call":
        return ast_symbols(node[2])
    return ast_symbols(node[1]) | ast_symbols(node[2])


def build(node, table: Mapping[str, Symbol]) -> Expr:
    kind = node[0]
    if kind == "num":
        return Expr.scalar(node[1])
    if kind == "sym":
        try:
            return Expr.symbol(table[node[1]])
        except KeyError:
            raise UndeclaredSymbolError(f"undeclared identifier {node[1]!r}") from None
    if kind == "neg":
        return -build(node[1], table)
    if kind == "add":
        return build(node[1], table) + build(node[2], table)
    if kind == "sub":
        return build(node[1], table) - build(node[2], table)
    if kind == "mul":
        return build(node[1], table) * build(node[2], table)
    if kind == "div":
        return build(node[1], table) / build(node[2], table)
    if kind == "pow":
        return build(node[1], table) ** node[2]
    if kind == "call":
        arg = build(node[2], table)
        return getattr(Expr, node[1])(arg)
    raise ParseError(f"bad node {node!r}")


def parse(text: str, table: Mapping[str, Symbol]) -> Expr:
    """Parse ``text`` into a canonical Expr using the declared symbols."""
    return build(parse_ast(text), table)
