"""Exact sparse Gaussian elimination over a field.

Rows are ``({unknown: coefficient}, rhs)``.  Field elements only need
``+ - * /`` and comparison with 0, so the same code runs over
:class:`~ciquant.scalar.Scalar` and over sympy's rational-function fields.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from sympy import Symbol as SympySymbol
from sympy.polys.domains import QQ, QQ_I

from .expr import Expr, ExprError, Symbol
from .scalar import ONE, Scalar


def _is_zero(x) -> bool:
    return x == 0


@dataclass
class Solution:
    n_unknowns: int
    values: dict[int, object] = field(default_factory=dict)
    free: list[int] = field(default_factory=list)
    dependent: list[int] = field(default_factory=list)  # pivots that still involve free unknowns
    rank: int = 0
    inconsistent: list[int] = field(default_factory=list)  # indices of offending rows

    @property
    def determined(self) -> bool:
        return not self.free and not self.dependent and not self.inconsistent


def gauss_solve(rows: Sequence[tuple[dict[int, object], object]], n_unknowns: int, zero, one) -> Solution:
    """Reduced row echelon form, built row by row (rows are dict-sparse)."""
    pivots: dict[int, tuple[dict[int, object], object, int]] = {}
    inconsistent: list[int] = []
    for ri, (coeffs, rhs) in enumerate(rows):
        r = {u: c for u, c in coeffs.items() if not _is_zero(c)}
        b = rhs
        # eliminate known pivots
        for u in [u for u in r if u in pivots]:
            c = r.pop(u, None)
            if c is None or _is_zero(c):
                continue
            prow, prhs, _ = pivots[u]
            for v, pc in prow.items():
                if v == u:
                    continue
                nv = r.get(v, zero) - c * pc
                if _is_zero(nv):
                    r.pop(v, None)
                else:
                    r[v] = nv
            b = b - c * prhs
        # later pivots may have introduced earlier-pivot unknowns? no: pivot rows are reduced
        if not r:
            if not _is_zero(b):
                inconsistent.append(ri)
            continue
        u = min(r)
        inv = one / r[u]
        prow = {v: c * inv for v, c in r.items()}
        prow[u] = one
        prhs = b * inv
        # keep existing pivot rows reduced with respect to the new pivot
        for w, (wrow, wrhs, wri) in list(pivots.items()):
            c = wrow.get(u)
            if c is None or _is_zero(c):
                continue
            nrow = dict(wrow)
            del nrow[u]
            for v, pc in prow.items():
                if v == u:
                    continue
                nv = nrow.get(v, zero) - c * pc
                if _is_zero(nv):
                    nrow.pop(v, None)
                else:
                    nrow[v] = nv
            pivots[w] = (nrow, wrhs - c * prhs, wri)
        pivots[u] = (prow, prhs, ri)
    sol = Solution(n_unknowns=n_unknowns, rank=len(pivots), inconsistent=inconsistent)
    sol.free = sorted(u for u in range(n_unknowns) if u not in pivots)
    for u, (prow, prhs, _) in pivots.items():
        if len(prow) == 1:
            sol.values[u] = prhs
        else:
            sol.dependent.append(u)
    sol.dependent.sort()
    return sol


# ----------------------------------------------------------------------
# Expr <-> sympy rational-function field


def _gauss(c: Scalar):
    return QQ_I(QQ(c.re.numerator, c.re.denominator), QQ(c.im.numerator, c.im.denominator))


def _from_qq(q) -> Fraction:
    return Fraction(int(q.numerator), int(q.denominator))


class ParameterField:
    """The field QQ(i)(p1, ..., pn) of rational functions in parameter symbols."""

    def __init__(self, params: Sequence[Symbol]):
        self.params = list(sorted(set(params), key=lambda s: s.sort_key))
        if not self.params:
            raise ExprError("a parameter field needs at least one parameter")
        self._sym = [SympySymbol(f"p{k}") for k in range(len(self.params))]
        self.K = QQ_I.frac_field(*self._sym)
        self.index = {p: k for k, p in enumerate(self.params)}
        self.zero = self.K.zero
        self.one = self.K.one

    def gen(self, p: Symbol):
        return self.K.gens[self.index[p]]

    def to_field(self, e: Expr):
        out = self.K.zero
        for (factors, expo), c in e.monomials():
            if expo is not None:
                raise ExprError(f"exponential factor in a coefficient: {e}")
            term = self.K(_gauss(c))
            for s, p in factors:
                if s not in self.index:
                    raise ExprError(f"{s.name} is not a parameter of this field")
                g = self.gen(s)
                term = term * (g**p if p > 0 else self.K.one / g ** (-p))
            out = out + term
        return out

    def _poly_to_expr(self, poly) -> Expr:
        out = Expr()
        for monom, c in poly.terms():
            term = Expr.scalar(Scalar(_from_qq(c.x), _from_qq(c.y)))
            for k, p in enumerate(monom):
                if p:
                    term = term * Expr.symbol(self.params[k], p)
            out = out + term
        return out

    def to_expr(self, x) -> Expr:
        """Back to Expr; the denominator must be a single monomial."""
        num = self._poly_to_expr(x.numer)
        den = self._poly_to_expr(x.denom)
        if len(den) != 1:
            raise ExprError(f"rational function with non-monomial denominator: ({num})/({den})")
        return num / den

    def describe(self, x) -> str:
        num = self._poly_to_expr(x.numer)
        den = self._poly_to_expr(x.denom)
        if den == Expr.scalar(1):
            return str(num)
        return f"({num})/({den})"


class ScalarField:
    zero = Scalar(0)
    one = ONE

    def to_field(self, e: Expr) -> Scalar:
        return e.as_scalar()

    def to_expr(self, x: Scalar) -> Expr:
        return Expr.scalar(x)

    def describe(self, x) -> str:
        return str(x)


class NotMonomial(ExprError):
    pass


class Monomial:
    """c * p1^e1 * ... * pn^en with integer (Laurent) exponents."""

    __slots__ = ("c", "e")

    def __init__(self, c: Scalar, e: tuple[int, ...]):
        self.c = c
        self.e = e if c else ()

    def __add__(self, other: "Monomial") -> "Monomial":
        if not other.c:
            return self
        if not self.c:
            return other
        if self.e != other.e:
            raise NotMonomial("sum of unlike monomials")
        return Monomial(self.c + other.c, self.e)

    def __neg__(self) -> "Monomial":
        return Monomial(-self.c, self.e)

    def __sub__(self, other: "Monomial") -> "Monomial":
        return self + (-other)

    def _combine(self, other, sign):
        if not self.e:
            return other.e if sign > 0 else tuple(-x for x in other.e)
        if not other.e:
            return self.e
        return tuple(a + sign * b for a, b in zip(self.e, other.e))

    def __mul__(self, other):
        if isinstance(other, int):
            return Monomial(self.c * other, self.e)
        if not self.c or not other.c:
            return Monomial(Scalar(0), ())
        return Monomial(self.c * other.c, self._combine(other, 1))

    __rmul__ = __mul__

    def __truediv__(self, other: "Monomial") -> "Monomial":
        if not other.c:
            raise ZeroDivisionError("division by zero monomial")
        if not self.c:
            return self
        return Monomial(self.c / other.c, self._combine(other, -1))

    def __eq__(self, other):
        if isinstance(other, (int, Scalar)):
            return self.c == other and (not self.c or not any(self.e))
        return self.c == other.c and (not self.c or self._norm() == other._norm())

    def _norm(self):
        return tuple(self.e) if any(self.e) else ()

    def __hash__(self):
        return hash((self.c, self._norm()))


class MonomialField:
    """Single-term elements over parameter symbols; cheap but partial.

    Raises :class:`NotMonomial` as soon as elimination needs a genuine sum,
    in which case the caller falls back to :class:`ParameterField`.
    """

    def __init__(self, params: Sequence[Symbol]):
        self.params = list(sorted(set(params), key=lambda s: s.sort_key))
        self.index = {p: k for k, p in enumerate(self.params)}
        self.zero = Monomial(Scalar(0), ())
        self.one = Monomial(ONE, ())

    def to_field(self, e: Expr) -> Monomial:
        if not e:
            return self.zero
        if len(e) != 1:
            raise NotMonomial(f"coefficient {e} is not a single term")
        ((factors, expo), c), = e.monomials()
        if expo is not None:
            raise ExprError(f"exponential factor in a coefficient: {e}")
        ex = [0] * len(self.params)
        for s, p in factors:
            if s not in self.index:
                raise ExprError(f"{s.name} is not a parameter of this field")
            ex[self.index[s]] = p
        return Monomial(c, tuple(ex))

    def to_expr(self, x: Monomial) -> Expr:
        out = Expr.scalar(x.c)
        for k, p in enumerate(x.e):
            if p:
                out = out * Expr.symbol(self.params[k], p)
        return out

    def describe(self, x) -> str:
        return str(self.to_expr(x))
