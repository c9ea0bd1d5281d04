"""Canonical expressions over graded (even/odd) symbols.

An :class:`Expr` is a finite sum of monomials.  A monomial is an exact
:class:`~ciquant.scalar.Scalar` coefficient times an ordered product of symbol
powers times at most one ``exp(...)`` factor.  ``sin`` and ``cos`` are
rewritten into exponentials when built, so identities like
``sin(t)^2 + cos(t)^2 == 1`` hold structurally.

Odd symbols anticommute: swapping two adjacent odd factors flips the sign and
an odd symbol squares to zero.  Factors are kept sorted by
``(role rank, name)``; the sign picked up while sorting is folded into the
coefficient.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Iterator, Mapping, Sequence

from .scalar import ONE, ZERO, I, Scalar


class ExprError(ValueError):
    pass


class UnsupportedBasisError(ExprError):
    pass


class ParityError(ExprError):
    pass


class Parity(IntEnum):
    EVEN = 0
    ODD = 1

    def __add__(self, other):
        return Parity((int(self) + int(other)) % 2)


ROLES = (
    "parameter",
    "integration-constant",
    "dynamical-variable",
    "velocity",
    "momentum",
    "coordinate",
    "time",
    "mode-index",
)
_ROLE_RANK = {r: i for i, r in enumerate(ROLES)}


@dataclass(frozen=True)
class Symbol:
    name: str
    role: str = "parameter"
    parity: Parity = Parity.EVEN
    conjugate: str | None = field(default=None, compare=False)
    # numeric value used by the oracle and numeric evaluation (parameters)
    value: complex | None = field(default=None, compare=False)
    # momentum -> its variable; velocity -> its variable
    partner: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.role not in _ROLE_RANK:
            raise ExprError(f"unknown role {self.role!r} for symbol {self.name!r}")
        object.__setattr__(self, "parity", Parity(self.parity))
        object.__setattr__(self, "_key", (_ROLE_RANK[self.role], self.name))

    @property
    def sort_key(self):
        return self._key

    @property
    def odd(self) -> bool:
        return self.parity == Parity.ODD

    def __lt__(self, other):
        return self._key < other._key

    def __str__(self):
        return self.name


# A monomial is (factors, exponent): factors is a sorted tuple of
# (Symbol, power) pairs, exponent is an Expr or None.
Monomial = tuple


def _odd_names(factors):
    return [s for s, _ in factors if s.odd]


def _mono_mul(m1, m2):
    """Product of two canonical monomials -> (sign, monomial) or (0, None)."""
    f1, e1 = m1
    f2, e2 = m2
    sign = 1
    odd1 = _odd_names(f1)
    if odd1:
        for s2 in _odd_names(f2):
            for s1 in odd1:
                if s1 == s2:
                    return 0, None
                if s2._key < s1._key:
                    sign = -sign
    powers: dict[Symbol, int] = {}
    for s, p in f1:
        powers[s] = p
    for s, p in f2:
        powers[s] = powers.get(s, 0) + p
    factors = tuple(sorted(((s, p) for s, p in powers.items() if p), key=lambda sp: sp[0]._key))
    if e1 is None:
        expo = e2
    elif e2 is None:
        expo = e1
    else:
        expo = e1 + e2
        if expo.is_zero():
            expo = None
    return sign, (factors, expo)


def _mono_parity(m) -> Parity:
    return Parity(sum(1 for s, _ in m[0] if s.odd) % 2)


def _mono_sort_key(m):
    factors, expo = m
    return (
        len(factors) + (expo is not None),
        tuple((s._key, p) for s, p in factors),
        "" if expo is None else str(expo),
    )


class Expr:
    """Immutable canonical expression: a map monomial -> nonzero Scalar."""

    __slots__ = ("_terms", "_hash", "_str")

    def __init__(self, terms: Mapping | None = None):
        self._terms = {m: c for m, c in (terms or {}).items() if c}
        self._hash = None
        self._str = None

    # ----- constructors -------------------------------------------------
    @classmethod
    def scalar(cls, value) -> "Expr":
        c = Scalar.coerce(value)
        return cls({((), None): c})

    @classmethod
    def symbol(cls, s: Symbol, power: int = 1) -> "Expr":
        if power == 0:
            return cls.scalar(1)
        if s.odd and power < 0:
            raise ParityError(f"odd symbol {s.name} cannot carry a negative power")
        if s.odd and power > 1:
            return cls()
        return cls({(((s, power),), None): ONE})

    @classmethod
    def exp(cls, arg: "Expr") -> "Expr":
        arg = as_expr(arg)
        if arg.is_zero():
            return cls.scalar(1)
        if any(s.odd for s in arg.free_symbols()):
            raise ParityError("exponent must not contain odd symbols")
        return cls({((), arg): ONE})

    @classmethod
    def cos(cls, arg: "Expr") -> "Expr":
        arg = as_expr(arg)
        return (cls.exp(arg * I) + cls.exp(arg * (-I))) * Scalar(1, 0) / 2

    @classmethod
    def sin(cls, arg: "Expr") -> "Expr":
        arg = as_expr(arg)
        return (cls.exp(arg * I) - cls.exp(arg * (-I))) / Scalar(0, 2)

    # ----- structure ----------------------------------------------------
    def is_zero(self) -> bool:
        return not self._terms

    def __bool__(self):
        return bool(self._terms)

    def is_scalar(self) -> bool:
        return all(m == ((), None) for m in self._terms)

    def as_scalar(self) -> Scalar:
        if not self.is_scalar():
            raise ExprError(f"{self} is not a pure number")
        return self._terms.get(((), None), ZERO)

    def monomials(self) -> Iterator[tuple[Monomial, Scalar]]:
        for m in sorted(self._terms, key=_mono_sort_key):
            yield m, self._terms[m]

    def terms(self) -> list["Expr"]:
        """Split into single-monomial Exprs (in print order)."""
        return [Expr({m: c}) for m, c in self.monomials()]

    def __len__(self):
        return len(self._terms)

    def free_symbols(self) -> set[Symbol]:
        out: set[Symbol] = set()
        for factors, expo in self._terms:
            out.update(s for s, _ in factors)
            if expo is not None:
                out |= expo.free_symbols()
        return out

    def contains(self, s: Symbol) -> bool:
        return s in self.free_symbols()

    def parity(self) -> Parity | None:
        """Parity of a homogeneous expression; None for zero, error if mixed."""
        ps = {_mono_parity(m) for m in self._terms}
        if not ps:
            return None
        if len(ps) > 1:
            raise ParityError(f"expression {self} mixes even and odd terms")
        return ps.pop()

    def is_even(self) -> bool:
        return all(_mono_parity(m) == Parity.EVEN for m in self._terms)

    # ----- arithmetic ---------------------------------------------------
    def __add__(self, other):
        other = as_expr(other)
        terms = dict(self._terms)
        for m, c in other._terms.items():
            terms[m] = terms.get(m, ZERO) + c
        return Expr(terms)

    __radd__ = __add__

    def __neg__(self):
        return Expr({m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-as_expr(other))

    def __rsub__(self, other):
        return as_expr(other) - self

    def __mul__(self, other):
        if isinstance(other, (int, Scalar)) or _is_fraction(other):
            c = Scalar.coerce(other)
            return Expr({m: v * c for m, v in self._terms.items()})
        other = as_expr(other)
        terms: dict = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                sign, m = _mono_mul(m1, m2)
                if not sign:
                    continue
                c = c1 * c2
                terms[m] = terms.get(m, ZERO) + (c if sign > 0 else -c)
        return Expr(terms)

    def __rmul__(self, other):
        return as_expr(other) * self

    def inverse(self) -> "Expr":
        if len(self._terms) != 1:
            raise ExprError(f"cannot divide by the multi-term expression {self}")
        (factors, expo), c = next(iter(self._terms.items()))
        if any(s.odd for s, _ in factors):
            raise ParityError(f"cannot divide by an expression containing odd symbols: {self}")
        inv_factors = tuple((s, -p) for s, p in factors)
        return Expr({(inv_factors, None if expo is None else -expo): ONE / c})

    def __truediv__(self, other):
        if isinstance(other, (int, Scalar)) or _is_fraction(other):
            c = Scalar.coerce(other)
            if not c:
                raise ZeroDivisionError("division by zero")
            return self * (ONE / c)
        other = as_expr(other)
        if other.is_zero():
            raise ZeroDivisionError("division by an expression that is identically zero")
        return self * other.inverse()

    def __rtruediv__(self, other):
        return as_expr(other) / self

    def __pow__(self, n: int):
        if not isinstance(n, int):
            raise ExprError("only integer powers are supported")
        if n < 0:
            return self.inverse() ** (-n)
        if len(self._terms) == 1:
            (factors, expo), c = next(iter(self._terms.items()))
            if any(s.odd for s, _ in factors) and n > 1:
                return Expr()
            if n == 0:
                return Expr.scalar(1)
            return Expr({(tuple((s, p * n) for s, p in factors), None if expo is None else expo * n): c**n})
        out = Expr.scalar(1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    # ----- comparison / hashing -----------------------------------------
    def __eq__(self, other):
        if not isinstance(other, Expr):
            try:
                other = as_expr(other)
            except TypeError:
                return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    # ----- printing -----------------------------------------------------
    def __str__(self):
        if self._str is None:
            self._str = _format(self)
        return self._str

    def __repr__(self):
        return f"Expr({str(self)!r})"


def _is_fraction(x) -> bool:
    from fractions import Fraction

    return isinstance(x, Fraction)


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, Symbol):
        return Expr.symbol(x)
    return Expr.scalar(x)


def _format_factor(s: Symbol, p: int) -> str:
    if p == 1:
        return s.name
    return f"{s.name}^{p}"


def _format_monomial(m, c: Scalar) -> str:
    factors, expo = m
    parts = [_format_factor(s, p) for s, p in factors]
    if expo is not None:
        parts.append(f"exp({expo})")
    if not parts:
        return str(c)
    body = "*".join(parts)
    if c == 1:
        return body
    if c == -1:
        return "-" + body
    return f"{c}*{body}"


def _format(e: Expr) -> str:
    if e.is_zero():
        return "0"
    out = []
    for i, (m, c) in enumerate(e.monomials()):
        s = _format_monomial(m, c)
        if i == 0:
            out.append(s)
        elif s.startswith("-"):
            out.append(" - " + s[1:])
        else:
            out.append(" + " + s)
    return "".join(out)


# ----------------------------------------------------------------------
# derivatives


def _diff_monomial_even(m, c, s):
    factors, expo = m
    out = Expr()
    for j, (sym, p) in enumerate(factors):
        if sym == s:
            new = list(factors)
            if p == 1:
                del new[j]
            else:
                new[j] = (sym, p - 1)
            out = out + Expr({(tuple(new), expo): c * p})
            break
    if expo is not None:
        de = differentiate(expo, s)
        if de:
            out = out + Expr({m: c}) * de
    return out


def differentiate(e: Expr, s: Symbol, side: str = "left") -> Expr:
    """Partial derivative; for odd ``s`` the left (or right) derivative.

    The left derivative moves ``s`` to the front of each monomial before
    deleting it, the right derivative moves it to the back.
    """
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    e = as_expr(e)
    if not s.odd:
        out = Expr()
        for m, c in e._terms.items():
            out = out + _diff_monomial_even(m, c, s)
        return out
    terms: dict = {}
    for (factors, expo), c in e._terms.items():
        odd = [sym for sym, _ in factors if sym.odd]
        if s not in odd:
            continue
        j = odd.index(s)
        swaps = j if side == "left" else len(odd) - 1 - j
        new = tuple(fp for fp in factors if fp[0] != s)
        key = (new, expo)
        terms[key] = terms.get(key, ZERO) + (c if swaps % 2 == 0 else -c)
    return Expr(terms)


def left_derivative(e: Expr, s: Symbol) -> Expr:
    return differentiate(e, s, "left")


def right_derivative(e: Expr, s: Symbol) -> Expr:
    return differentiate(e, s, "right")


# ----------------------------------------------------------------------
# substitution and numeric evaluation


def _lookup(bindings: Mapping, s: Symbol):
    if s in bindings:
        return bindings[s]
    return bindings.get(s.name)


def substitute(e: Expr, bindings: Mapping) -> Expr:
    """Simultaneous substitution ``symbol -> Expr``; keys are Symbols or names."""
    checked: dict[Symbol, Expr | None] = {}

    def value_for(s: Symbol):
        if s not in checked:
            v = _lookup(bindings, s)
            if v is not None:
                v = as_expr(v)
                vp = v.parity()
                if vp is not None and vp != s.parity:
                    raise ParityError(f"{s.name} is {s.parity.name.lower()} but is bound to {v}")
            checked[s] = v
        return checked[s]

    def walk(x: Expr) -> Expr:
        out = Expr()
        for (factors, expo), c in x._terms.items():
            term = Expr.scalar(c)
            for s, p in factors:
                v = value_for(s)
                term = term * (Expr.symbol(s, p) if v is None else v**p)
            if expo is not None:
                term = term * Expr.exp(walk(expo))
            out = out + term
        return out

    return walk(as_expr(e))


def evaluate_numeric(e: Expr, bindings: Mapping | None = None) -> complex:
    """Floating evaluation; parameters fall back to their attached value."""
    bindings = bindings or {}
    total = 0j
    for (factors, expo), c in as_expr(e)._terms.items():
        v = complex(c)
        for s, p in factors:
            if s.odd:
                raise ParityError(f"odd symbol {s.name} cannot be evaluated numerically")
            x = _lookup(bindings, s)
            if x is None:
                x = s.value
            if x is None:
                raise ExprError(f"unbound symbol {s.name}")
            v *= complex(x) ** p
        if expo is not None:
            v *= cmath.exp(evaluate_numeric(expo, bindings))
        total += v
    return total


def evaluate_array(e: Expr, bindings: Mapping | None = None):
    """Like :func:`evaluate_numeric` but bindings may be numpy arrays (broadcast)."""
    import numpy as np

    bindings = bindings or {}
    total = 0j
    for (factors, expo), c in as_expr(e)._terms.items():
        v = complex(c)
        for s, p in factors:
            if s.odd:
                raise ParityError(f"odd symbol {s.name} cannot be evaluated numerically")
            x = _lookup(bindings, s)
            if x is None:
                x = s.value
            if x is None:
                raise ExprError(f"unbound symbol {s.name}")
            v = v * np.asarray(x, dtype=complex) ** p
        if expo is not None:
            v = v * np.exp(evaluate_array(expo, bindings))
        total = total + v
    return total


# ----------------------------------------------------------------------
# splitting by symbol classes


def split_factors(e: Expr, keep) -> dict[Monomial, Expr]:
    """Group monomials by their factors selected by ``keep(symbol)``.

    Returns ``{selected-monomial: coefficient Expr}`` where the coefficient
    carries the coefficient, unselected factors and the exp factor.  The
    unselected factors must be even, so no reordering sign arises.
    """
    out: dict = {}
    for (factors, expo), c in as_expr(e)._terms.items():
        sel = tuple(fp for fp in factors if keep(fp[0]))
        rest = tuple(fp for fp in factors if not keep(fp[0]))
        if any(s.odd for s, _ in rest):
            raise ParityError("unselected factors must be even")
        key = (sel, None)
        out[key] = out.get(key, Expr()) + Expr({(rest, expo): c})
    return {k: v for k, v in out.items() if v}


def monomial_expr(m: Monomial) -> Expr:
    return Expr({m: ONE})


# ----------------------------------------------------------------------
# time-basis decomposition


def _linear_split(expo: Expr, basis: Sequence[Symbol]):
    freqs = {v: Expr() for v in basis}
    rest = Expr()
    for (factors, inner), c in expo._terms.items():
        hits = [(s, p) for s, p in factors if s in freqs]
        if not hits:
            if inner is not None and any(inner.contains(v) for v in basis):
                raise UnsupportedBasisError(f"nested exponential in {expo}")
            rest = rest + Expr({(factors, inner): c})
            continue
        if len(hits) != 1 or hits[0][1] != 1 or inner is not None:
            raise UnsupportedBasisError(f"exponent {expo} is not linear in {[v.name for v in basis]}")
        v = hits[0][0]
        others = tuple(fp for fp in factors if fp[0] != v)
        if any(s.role != "parameter" for s, _ in others):
            raise UnsupportedBasisError(
                f"frequency of {v.name} in {expo} depends on non-parameter symbols"
            )
        freqs[v] = freqs[v] + Expr({(others, None): c})
    return freqs, rest


def time_basis_decompose(e: Expr, t) -> list[tuple[Expr, Expr]]:
    """Decompose ``e`` over the basis ``t^n * exp(w*t)`` (jointly for several vars).

    ``t`` may be a single Symbol or a sequence of basis variables (time and
    spatial coordinates).  Coefficients are free of the basis variables and
    the pairs are returned in a deterministic order.  ``sin``/``cos`` are
    already exponentials in canonical form, so distinct keys are linearly
    independent functions.
    """
    basis = [t] if isinstance(t, Symbol) else list(t)
    bset = set(basis)
    groups: dict = {}
    for (factors, expo), c in as_expr(e)._terms.items():
        powers = tuple(dict(factors).get(v, 0) for v in basis)
        if any(p < 0 for p in powers):
            raise UnsupportedBasisError("negative powers of a basis variable are not supported")
        rest_factors = tuple(fp for fp in factors if fp[0] not in bset)
        if expo is None:
            freqs = {v: Expr() for v in basis}
            rest = Expr()
        else:
            freqs, rest = _linear_split(expo, basis)
        key = (powers, tuple(freqs[v] for v in basis))
        coeff = Expr({(rest_factors, None): c})
        if rest:
            coeff = coeff * Expr.exp(rest)
        groups[key] = groups.get(key, Expr()) + coeff
    out = []
    for (powers, freqs), coeff in groups.items():
        if not coeff:
            continue
        b = Expr.scalar(1)
        for v, p in zip(basis, powers):
            if p:
                b = b * Expr.symbol(v, p)
        arg = Expr()
        for v, w in zip(basis, freqs):
            arg = arg + w * Expr.symbol(v)
        b = b * Expr.exp(arg)
        out.append((b, coeff))
    out.sort(key=lambda bc: str(bc[0]))
    return out


def basis_key(decomposition_basis: Expr) -> str:
    return str(decomposition_basis)


def to_trig(decomposition: list[tuple[Expr, Expr]], t: Symbol) -> dict[str, Expr]:
    """Regroup an exponential decomposition in one variable into sin/cos labels.

    ``c+ e^{iwt} + c- e^{-iwt} = (c+ + c-) cos(wt) + i(c+ - c-) sin(wt)``.
    Keys are strings such as ``"cos(t)"``, ``"sin(2*omega*t)"`` or ``"1"``;
    terms with non-imaginary frequency or polynomial prefactors keep their
    exponential label.
    """
    coeffs: dict[str, tuple[Expr, Expr, Expr]] = {}
    out: dict[str, Expr] = {}
    for b, c in decomposition:
        factors, expo = next(iter(b._terms))
        if factors or expo is None:
            out[str(b)] = out.get(str(b), Expr()) + c
            continue
        w = differentiate(expo, t)  # expo = w*t
        w_over_i = w / I
        if w_over_i.free_symbols() and not all(s.role == "parameter" for s in w_over_i.free_symbols()):
            out[str(b)] = c
            continue
        # canonical orientation: positive leading coefficient
        lead = next(iter(w_over_i.monomials()))[1]
        if not lead.is_real():
            out[str(b)] = c
            continue
        if lead.re > 0:
            key = str(w_over_i)
            plus, minus = coeffs.get(key, (w_over_i, Expr(), Expr()))[1:]
            coeffs[key] = (w_over_i, plus + c, minus)
        else:
            key = str(-w_over_i)
            plus, minus = coeffs.get(key, (-w_over_i, Expr(), Expr()))[1:]
            coeffs[key] = (-w_over_i, plus, minus + c)
    for key, (w, plus, minus) in coeffs.items():
        arg = str(w * Expr.symbol(t))
        cos_c = plus + minus
        sin_c = (plus - minus) * I
        if cos_c:
            out[f"cos({arg})"] = cos_c
        if sin_c:
            out[f"sin({arg})"] = sin_c
    return out


def iter_symbols(exprs: Iterable[Expr]) -> set[Symbol]:
    out: set[Symbol] = set()
    for e in exprs:
        out |= as_expr(e).free_symbols()
    return out
