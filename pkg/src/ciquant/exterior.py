"""Matrix representation of the exterior (Grassmann) algebra.

Independent check for the graded sign bookkeeping in :mod:`ciquant.expr`:
odd generators become 2^n x 2^n left-multiplication matrices acting on the
basis ``e_S`` (S a bitmask, factors in increasing generator index), even
symbols become numbers.  An algebra element is identified with its image of
``e_{}``.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg

from .expr import Expr, Symbol


def _below(mask: int, k: int) -> int:
    return bin(mask & ((1 << k) - 1)).count("1")


def _above(mask: int, k: int) -> int:
    return bin(mask >> (k + 1)).count("1")


@lru_cache(maxsize=None)
def creation(n: int, k: int) -> np.ndarray:
    """Left multiplication by generator k."""
    dim = 1 << n
    m = np.zeros((dim, dim), dtype=complex)
    for s in range(dim):
        if not s & (1 << k):
            m[s | (1 << k), s] = (-1) ** _below(s, k)
    return m


@lru_cache(maxsize=None)
def left_contraction(n: int, k: int) -> np.ndarray:
    dim = 1 << n
    m = np.zeros((dim, dim), dtype=complex)
    for s in range(dim):
        if s & (1 << k):
            m[s & ~(1 << k), s] = (-1) ** _below(s, k)
    return m


@lru_cache(maxsize=None)
def right_contraction(n: int, k: int) -> np.ndarray:
    dim = 1 << n
    m = np.zeros((dim, dim), dtype=complex)
    for s in range(dim):
        if s & (1 << k):
            m[s & ~(1 << k), s] = (-1) ** _above(s, k)
    return m


class ExteriorAlgebra:
    def __init__(self, generators: Sequence[str]):
        self.gens = list(generators)
        self.n = len(self.gens)
        self.dim = 1 << self.n
        self.index = {g: k for k, g in enumerate(self.gens)}

    def identity(self) -> np.ndarray:
        return np.eye(self.dim, dtype=complex)

    def generator(self, name: str) -> np.ndarray:
        return creation(self.n, self.index[name])

    def vector(self, m: np.ndarray) -> np.ndarray:
        return m[:, 0].copy()

    def multiplication(self, v: np.ndarray) -> np.ndarray:
        """Left-multiplication matrix of the element with coordinates v."""
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for s in range(self.dim):
            if v[s] == 0:
                continue
            m = self.identity()
            for k in reversed(range(self.n)):
                if s & (1 << k):
                    m = creation(self.n, k) @ m
            out += v[s] * m
        return out

    def multiply(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        return self.multiplication(u) @ v

    def left_derivative(self, v: np.ndarray, name: str) -> np.ndarray:
        return left_contraction(self.n, self.index[name]) @ v

    def right_derivative(self, v: np.ndarray, name: str) -> np.ndarray:
        return right_contraction(self.n, self.index[name]) @ v

    # ----- evaluation of expressions -------------------------------------
    def from_ast(self, node, env: Mapping[str, complex]) -> np.ndarray:
        """Evaluate a parser AST to a left-multiplication matrix."""
        kind = node[0]
        if kind == "num":
            return complex(node[1]) * self.identity()
        if kind == "sym":
            if node[1] in self.index:
                return self.generator(node[1])
            return complex(env[node[1]]) * self.identity()
        if kind == "neg":
            return -self.from_ast(node[1], env)
        if kind in ("add", "sub", "mul", "div"):
            a = self.from_ast(node[1], env)
            b = self.from_ast(node[2], env)
            if kind == "add":
                return a + b
            if kind == "sub":
                return a - b
            if kind == "mul":
                return a @ b
            return a @ np.linalg.inv(b)
        if kind == "pow":
            m = self.from_ast(node[1], env)
            p = node[2]
            if p < 0:
                m, p = np.linalg.inv(m), -p
            return np.linalg.matrix_power(m, p)
        if kind == "call":
            a = self.from_ast(node[2], env)
            if node[1] == "exp":
                return scipy.linalg.expm(a)
            ep, em = scipy.linalg.expm(1j * a), scipy.linalg.expm(-1j * a)
            if node[1] == "cos":
                return (ep + em) / 2
            return (ep - em) / 2j
        raise ValueError(f"bad node {node!r}")

    def from_expr(self, e: Expr, env: Mapping[str, complex]) -> np.ndarray:
        """Element vector of a canonical Expr, factors applied in stored order."""
        v = np.zeros(self.dim, dtype=complex)
        base = np.zeros(self.dim, dtype=complex)
        base[0] = 1.0
        from .expr import evaluate_numeric

        for (factors, expo), c in e.monomials():
            w = complex(c) * base
            even = 1.0 + 0j
            odd_ops = []
            for s, p in factors:
                if s.odd:
                    odd_ops.append(self.generator(s.name))
                else:
                    x = env.get(s.name, s.value)
                    if x is None:
                        raise KeyError(s.name)
                    even *= complex(x) ** p
            if expo is not None:
                even *= np.exp(evaluate_numeric(expo, env))
            for op in reversed(odd_ops):
                w = op @ w
            v += even * w
        return v

    def bracket(self, f: np.ndarray, g: np.ndarray, table: Mapping[tuple[str, str], complex]) -> np.ndarray:
        """Graded bracket sum_{kl} B_kl (f d<-_k)(d->_l g) over the odd generators."""
        out = np.zeros(self.dim, dtype=complex)
        for (k, l), b in table.items():
            if b == 0:
                continue
            out += b * self.multiply(self.right_derivative(f, k), self.left_derivative(g, l))
        return out


def odd_generators(exprs: Sequence[Expr]) -> list[str]:
    names: list[str] = []
    for e in exprs:
        for s in sorted(e.free_symbols(), key=lambda s: s.name):
            if s.odd and s.name not in names:
                names.append(s.name)
    return names


def symbol_env(symbols: Sequence[Symbol]) -> dict[str, complex]:
    return {s.name: s.value for s in symbols if s.value is not None}


def crosscheck_brackets(model, table, pairs: Sequence[tuple[str, str]], t_value: float = 0.37) -> list[dict]:
    """Recompute propagated brackets of odd functions with exterior-algebra matrices.

    The derived table supplies the numbers B_kl; derivatives and products are
    done by contraction/creation matrices instead of the canonical-form code.
    """
    from .brackets import propagate_bracket
    from .expr import evaluate_numeric

    gens = [c.name for c in table.constants if c.odd]
    alg = ExteriorAlgebra(gens)
    env = symbol_env(model.symbols.values())
    env[model.time.name] = t_value
    for x in model.coordinates:
        env[x.name] = 0.0
    numeric = {}
    for (k, l), v in table.values.items():
        ck, cl = table.constants[k], table.constants[l]
        if ck.odd and cl.odd and v is not None and v:
            numeric[(ck.name, cl.name)] = evaluate_numeric(v, env)
    out = []
    for f_text, g_text in pairs:
        f = model.on_shell(model.parse(f_text))
        g = model.on_shell(model.parse(g_text))
        derived = propagate_bracket(f, g, table, model).raw
        vec = alg.bracket(alg.from_expr(f, env), alg.from_expr(g, env), numeric)
        dev = float(np.abs(vec - alg.from_expr(derived, env)).max())
        out.append({"bracket": f"{{{f_text}, {g_text}}}", "derived": str(derived), "deviation": dev})
    return out
