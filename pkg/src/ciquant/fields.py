"""Finite mode truncations of the field-theory models.

Momenta live in a box of length L, k_n = n * kappa with kappa = 2 pi / L.
Expansion coefficients are parameter symbols ``c_n`` whose squares are known
exactly (``ModelSpec.squares``), so ladder tables come out as clean
Kronecker deltas and propagated field brackets stay exact.  The identity
kappa * L = 2 pi is only used when lattice phases are evaluated as roots of
unity (:func:`exact_site_value`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
import sympy

from .brackets import BracketTable, DerivationError, propagate_bracket
from .expr import Expr, ExprError, Parity, Symbol, differentiate, substitute
from .model import GeneralSolution, Golden, ModelError, ModelSpec
from .scalar import I, Scalar

SIGMA = np.array(
    [[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]],
    dtype=complex,
)
CHI = np.eye(2, dtype=complex)
I_SIGMA2 = np.array([[0, 1], [-1, 0]], dtype=complex)


# ----------------------------------------------------------------------
# mode sets and spinors


@dataclass(frozen=True)
class ModeSet:
    """Box momenta k_n = 2 pi n / L for the integer labels in ``indices``."""

    indices: tuple[int, ...]
    L: float
    positive: bool = False

    def __post_init__(self):
        if len(set(self.indices)) != len(self.indices):
            raise ModelError("mode labels must be distinct")
        if not self.L > 0:
            raise ModelError("box length must be positive")
        if self.positive and any(n <= 0 for n in self.indices):
            raise ModelError("positive mode set contains k <= 0")

    @classmethod
    def symmetric(cls, N: int, L: float) -> "ModeSet":
        """n = -N..N without the zero mode."""
        _check_N(N)
        return cls(tuple(n for n in range(-N, N + 1) if n != 0), float(L))

    @classmethod
    def positive_modes(cls, N: int, L: float) -> "ModeSet":
        _check_N(N)
        return cls(tuple(range(1, N + 1)), float(L), positive=True)

    @property
    def N(self) -> int:
        return max(abs(n) for n in self.indices)

    @property
    def kappa(self) -> float:
        return 2 * np.pi / self.L

    @property
    def momenta(self) -> np.ndarray:
        return np.array(self.indices, dtype=float) * self.kappa


def _check_N(N: int) -> None:
    if not isinstance(N, (int, np.integer)) or N < 1:
        raise ModelError(f"truncation order must be an integer >= 1, got {N!r}")


def _check_positive(name: str, x: float) -> float:
    x = float(x)
    if not x > 0:
        raise ModelError(f"{name} must be positive, got {x}")
    return x


@dataclass(frozen=True)
class SpinorPair:
    """The two spinor families w^(1)_s(k), w^(2)_s(k); rows are indexed by s."""

    k: np.ndarray
    m: float
    w1: np.ndarray
    w2: np.ndarray

    @property
    def k0(self) -> float:
        return float(np.sqrt(self.k @ self.k + self.m**2))

    @classmethod
    def build(cls, k, m: float) -> "SpinorPair":
        k = np.atleast_1d(np.asarray(k, dtype=float))
        if k.size == 1:
            k = np.array([k[0], 0.0, 0.0])
        m = _check_positive("mass", m)
        k0 = np.sqrt(k @ k + m**2)
        sk = np.einsum("i,ijk->jk", k, SIGMA)
        M = np.sqrt((k0 + m) / (2 * m)) * (np.eye(2) - sk / (k0 + m)) / np.sqrt(2)
        w1 = np.array([M @ CHI[:, s] for s in range(2)])
        w2 = np.array([M @ I_SIGMA2 @ CHI[:, s] for s in range(2)])
        return cls(k, m, w1, w2)

    def spin_sum(self, which: int) -> np.ndarray:
        w = self.w1 if which == 1 else self.w2
        return sum(np.outer(w[s], w[s].conj()) for s in range(2))

    def residual(self) -> float:
        """max |sum_s w_s w_s^dagger - (k0 - sigma.k)/(2m)| over both families.

        Equivalent to sum_s w_s w_s^dagger (k0 + sigma.k) = (m/2) I, but free
        of the k0^2 cancellation at large |k|.
        """
        sk = np.einsum("i,ijk->jk", self.k, SIGMA)
        target = (self.k0 * np.eye(2) - sk) / (2 * self.m)
        return max(float(np.abs(self.spin_sum(j) - target).max()) for j in (1, 2))


# ----------------------------------------------------------------------
# helpers for building models


def _param(name: str, value=None) -> Symbol:
    return Symbol(name, "parameter", value=None if value is None else complex(value))


def _const(name: str, conj: str, odd: bool = False) -> Symbol:
    return Symbol(name, "integration-constant", Parity.ODD if odd else Parity.EVEN, conjugate=conj)


def _label(n: int) -> str:
    return f"m{-n}" if n < 0 else str(n)


def _sym(s: Symbol, p: int = 1) -> Expr:
    return Expr.symbol(s, p)


def _symbols(*groups) -> dict[str, Symbol]:
    out: dict[str, Symbol] = {}
    for g in groups:
        for s in g:
            out[s.name] = s
    return out


def _ladder_table(pairs: Sequence[tuple[str, str]], value: str, other: str | None) -> dict[tuple[str, str], str]:
    table = {}
    for a, ad in pairs:
        table[(a, ad)] = value
        if other is not None:
            table[(ad, a)] = other
    return table


# ----------------------------------------------------------------------
# O(2) sigma model in the angle variable


def truncate_sigma(N: int = 4, L: float = 2 * np.pi) -> ModelSpec:
    """theta(t, x) = q0 + p0 t / L + sum_n c_n (a_n e^{-i(|k_n| t - k_n x)} + c.c.).

    The zero mode (q0, p0) is kept so that the equal-time lattice bracket of
    theta and its velocity is exactly delta_ij / dx on the 2N+1 sites.
    """
    modes = ModeSet.symmetric(N, _check_positive("box length", L))
    t = Symbol("t", "time")
    x = Symbol("x", "coordinate")
    theta = Symbol("theta", "dynamical-variable")
    Pi = Symbol("Pi", "momentum", partner="theta")
    kappa = _param("kappa", modes.kappa)
    Lp = _param("L", modes.L)
    q0 = _const("q0", None)
    p0 = _const("p0", None)
    a = {n: _const(f"a_{_label(n)}", f"as_{_label(n)}") for n in modes.indices}
    ast = {n: _const(f"as_{_label(n)}", f"a_{_label(n)}") for n in modes.indices}
    c = {n: _param(f"c_{_label(n)}", 1 / np.sqrt(2 * modes.L * abs(n) * modes.kappa)) for n in modes.indices}

    K, Lx = _sym(kappa), _sym(Lp)
    th = _sym(q0) + _sym(p0) * _sym(t) * _sym(Lp, -1)
    H = _sym(p0, 2) * _sym(Lp, -1) * Fraction(1, 2)
    squares = {}
    for n in modes.indices:
        arg = I * (K * _sym(x) * n - K * _sym(t) * abs(n))
        th = th + _sym(c[n]) * (_sym(a[n]) * Expr.exp(arg) + _sym(ast[n]) * Expr.exp(-arg))
        H = H + K * abs(n) * _sym(ast[n]) * _sym(a[n])
        squares[c[n]] = Expr.scalar(Fraction(1, 2 * abs(n))) * Lx.inverse() * K.inverse()
    entries = {theta: th, Pi: differentiate(th, t)}
    consts = tuple(sorted([q0, p0, *a.values(), *ast.values()], key=lambda s: s.sort_key))
    golden_table = _ladder_table([(a[n].name, ast[n].name) for n in modes.indices], "-i", "i")
    golden_table[("q0", "p0")] = "1"
    golden_table[("p0", "q0")] = "-1"
    symbols = _symbols([t, x, theta, Pi, kappa, Lp, q0, p0], a.values(), ast.values(), c.values())
    return ModelSpec(
        name="sigma-o2",
        symbols=symbols,
        solution=GeneralSolution(entries, consts),
        hamiltonian=H,
        golden=tuple(Golden(a[n].name, ast[n].name, "-i") for n in modes.indices) + (Golden("q0", "p0", "1"),),
        golden_table=golden_table,
        squares=squares,
        notes=(
            "phi = cos(theta), psi = sin(theta) solve the constraint; theta obeys the free wave equation",
            "zero mode kept as q0 + p0 t / L so the site bracket is an exact lattice delta",
        ),
        meta={"kind": "sigma", "N": N, "L": modes.L, "modes": modes},
    )


def _cyclotomic(D: int):
    x = sympy.Symbol("zeta")
    return sympy.Poly(sympy.cyclotomic_poly(D, x), x, domain=sympy.QQ_I), x


def exact_site_value(e: Expr, kappa: Symbol, L: Symbol) -> Expr:
    """Evaluate phases exp(i r kappa L) as roots of unity, r rational.

    Terms are grouped by their non-exponential factor; each group is a
    polynomial in zeta = exp(2 pi i / D), reduced modulo the D-th cyclotomic
    polynomial.  Raises if a group does not reduce to a number.
    """
    groups: dict[tuple, dict[Fraction, Scalar]] = {}
    for (factors, expo), coeff in e.monomials():
        r = Fraction(0)
        if expo is not None:
            mons = list(expo.monomials())
            if len(mons) != 1 or set(mons[0][0][0]) != {(kappa, 1), (L, 1)} or mons[0][0][1] is not None:
                raise ExprError(f"phase {expo} is not a rational multiple of i kappa L")
            cc = mons[0][1]
            if cc.re != 0:
                raise ExprError(f"phase {expo} is not imaginary")
            r = cc.im % 1  # exp(i r kappa L) = exp(2 pi i r)
        g = groups.setdefault(factors, {})
        g[r] = g.get(r, Scalar(0)) + coeff
    out = Expr()
    for factors, phases in groups.items():
        D = 1
        for r in phases:
            D = D * r.denominator // np.gcd(D, r.denominator)
        coeffs = [Scalar(0)] * D
        for r, v in phases.items():
            coeffs[int(r * D)] += v
        if D == 1:
            val = coeffs[0]
        else:
            phi, z = _cyclotomic(D)
            dom = sympy.QQ_I
            poly = sympy.Poly.from_list(
                [dom(sympy.Rational(c.re.numerator, c.re.denominator), sympy.Rational(c.im.numerator, c.im.denominator)) for c in reversed(coeffs)],
                z,
                domain=dom,
            )
            rem = poly.rem(phi)
            if rem.degree() > 0:
                raise ExprError(f"phase sum does not reduce to a number: {rem}")
            c0 = rem.as_expr()
            val = Scalar(Fraction(str(sympy.re(c0))), Fraction(str(sympy.im(c0))))
        term = Expr.scalar(val)
        for s, p in factors:
            term = term * Expr.symbol(s, p)
        out = out + term
    return out


@dataclass
class LatticeBrackets:
    sites: int
    dx: Expr
    theta_theta: list[list[Expr]]
    theta_pi: list[list[Expr]]
    pi_pi: list[list[Expr]]

    def is_lattice_delta(self) -> bool:
        inv = self.dx.inverse()
        for i in range(self.sites):
            for j in range(self.sites):
                want = inv if i == j else Expr()
                if self.theta_pi[i][j] != want or self.theta_theta[i][j] or self.pi_pi[i][j]:
                    return False
        return True

    def numeric(self, L: float) -> np.ndarray:
        """2x2 block matrix M[i, j] of brackets of (theta, Pi) at sites i, j."""
        from .expr import evaluate_numeric

        env = {"L": L, "kappa": 2 * np.pi / L}
        n = self.sites
        M = np.zeros((n, n, 2, 2), dtype=complex)
        for i in range(n):
            for j in range(n):
                tp = evaluate_numeric(self.theta_pi[i][j], env)
                M[i, j] = [[evaluate_numeric(self.theta_theta[i][j], env), tp], [-tp, evaluate_numeric(self.pi_pi[i][j], env)]]
        return M


def sigma_lattice_bracket(model: ModelSpec, table: BracketTable) -> LatticeBrackets:
    """Exact equal-time brackets of theta and Pi on the sites x_j = j L/(2N+1)."""
    N = model.meta["N"]
    nsites = 2 * N + 1
    x = model.symbol("x")
    xp = Symbol("x_prime", "coordinate")
    kappa, L = model.symbol("kappa"), model.symbol("L")
    th = model.solution.entries[model.symbol("theta")]
    pi = model.solution.entries[model.symbol("Pi")]
    th2, pi2 = substitute(th, {x: Expr.symbol(xp)}), substitute(pi, {x: Expr.symbol(xp)})
    raw = {
        "tt": propagate_bracket(th, th2, table, model).raw,
        "tp": propagate_bracket(th, pi2, table, model).raw,
        "pp": propagate_bracket(pi, pi2, table, model).raw,
    }
    Lx = Expr.symbol(L)
    site = [Lx * Fraction(j, nsites) for j in range(nsites)]
    out = {k: [[None] * nsites for _ in range(nsites)] for k in raw}
    for key, e in raw.items():
        for i in range(nsites):
            for j in range(nsites):
                v = substitute(e, {x: site[i], xp: site[j]})
                out[key][i][j] = exact_site_value(v, kappa, L)
    return LatticeBrackets(nsites, Lx * Fraction(1, nsites), out["tt"], out["tp"], out["pp"])


@dataclass
class SigmaFieldCheck:
    max_deviation: float
    phi_phi_max: float
    phi_pi: np.ndarray  # site-diagonal 2x2 blocks of {phi_a, Pi_b} / (1/dx)
    pi_pi: np.ndarray


def sigma_field_brackets(lattice: LatticeBrackets, L: float, theta, theta_dot) -> SigmaFieldCheck:
    """Chain-rule brackets of phi = (cos theta, sin theta), Pi = d phi / dt on the lattice.

    Compared with (delta_ab - phi_a phi_b / phi^2) delta and
    -(phi_a Pi_b - phi_b Pi_a) / phi^2 delta.
    """
    theta = np.asarray(theta, dtype=float)
    td = np.asarray(theta_dot, dtype=float)
    n = lattice.sites
    M = lattice.numeric(L)
    inv_dx = n / L
    c, s = np.cos(theta), np.sin(theta)
    # rows: phi1, phi2, Pi1, Pi2 ; columns: d/dtheta, d/dtheta_dot
    J = np.zeros((n, 4, 2))
    J[:, 0, 0] = -s
    J[:, 1, 0] = c
    J[:, 2, 0] = -c * td
    J[:, 2, 1] = -s
    J[:, 3, 0] = -s * td
    J[:, 3, 1] = c
    phi = np.stack([c, s], axis=1)
    Pi = np.stack([-s * td, c * td], axis=1)
    dev = 0.0
    phi_phi = 0.0
    blocks_fp = np.zeros((n, 2, 2), dtype=complex)
    blocks_pp = np.zeros((n, 2, 2), dtype=complex)
    for i in range(n):
        for j in range(n):
            B = J[i] @ M[i, j] @ J[j].T
            d = inv_dx if i == j else 0.0
            norm2 = phi[i] @ phi[i]
            want_fp = (np.eye(2) - np.outer(phi[i], phi[i]) / norm2) * d
            want_pp = -(np.outer(phi[i], Pi[i]) - np.outer(Pi[i], phi[i])) / norm2 * d
            phi_phi = max(phi_phi, float(np.abs(B[:2, :2]).max()))
            dev = max(dev, float(np.abs(B[:2, 2:] - want_fp).max()), float(np.abs(B[2:, 2:] - want_pp).max()), phi_phi)
            if i == j:
                blocks_fp[i] = B[:2, 2:] / inv_dx
                blocks_pp[i] = B[2:, 2:] / inv_dx
    return SigmaFieldCheck(dev, phi_phi, blocks_fp, blocks_pp)


# ----------------------------------------------------------------------
# Majorana field, momenta along the x axis


def spinors(N: int, L: float, m: float) -> dict[int, SpinorPair]:
    modes = ModeSet.positive_modes(N, L)
    return {n: SpinorPair.build(k, m) for n, k in zip(modes.indices, modes.momenta)}


def build_majorana(N: int = 2, L: float = 2 * np.pi, m: float = 1.0) -> ModelSpec:
    """eta_alpha = sum_{n,s} f_n (a_s w1_s e^{-i(k0 t - k x)} + ad_s v_s w2_s e^{+i(...)}).

    Spinor components, f_n, k0_n and v_s are parameter symbols carrying the
    numeric values; the identification treats them as independent symbols.
    """
    modes = ModeSet.positive_modes(N, _check_positive("box length", L))
    m = _check_positive("mass", m)
    t = Symbol("t", "time")
    x = Symbol("x", "coordinate")
    eta = [Symbol(f"eta{al + 1}", "dynamical-variable", Parity.ODD) for al in range(2)]
    kappa = _param("kappa", modes.kappa)
    mass = _param("m", m)
    v = [_param(f"v{s + 1}", 1.0) for s in range(2)]
    sp = spinors(N, L, m)
    params = [kappa, mass, *v]
    consts = []
    golden_pairs = []
    H = Expr()
    comps = [Expr(), Expr()]
    for n in modes.indices:
        pair = sp[n]
        k0 = _param(f"k0_{n}", pair.k0)
        f = _param(f"f_{n}", np.sqrt(m / (modes.L * pair.k0)))
        params += [k0, f]
        arg = I * (_sym(kappa) * _sym(x) * n - _sym(k0) * _sym(t))
        for s in range(2):
            a = _const(f"a_s{s + 1}_{n}", f"ad_s{s + 1}_{n}", odd=True)
            ad = _const(f"ad_s{s + 1}_{n}", f"a_s{s + 1}_{n}", odd=True)
            consts += [a, ad]
            golden_pairs.append((a.name, ad.name))
            # N_s = (ad a - a ad)/2, canonicalised by the graded product
            H = H + _sym(k0) * (_sym(ad) * _sym(a) - _sym(a) * _sym(ad)) * Fraction(1, 2)
            for al in range(2):
                terms = Expr()
                w1, w2 = pair.w1[s, al], pair.w2[s, al]
                if w1 != 0:
                    p1 = _param(f"w1_s{s + 1}a{al + 1}_{n}", w1)
                    params.append(p1)
                    terms = terms + _sym(a) * _sym(p1) * Expr.exp(arg)
                if w2 != 0:
                    p2 = _param(f"w2_s{s + 1}a{al + 1}_{n}", w2)
                    params.append(p2)
                    terms = terms + _sym(ad) * _sym(v[s]) * _sym(p2) * Expr.exp(-arg)
                comps[al] = comps[al] + _sym(f) * terms
    entries = dict(zip(eta, comps))
    consts = tuple(sorted(consts, key=lambda s: s.sort_key))
    golden_table = _ladder_table(golden_pairs, "1", "1")
    golden = []
    for a, ad in golden_pairs[:2]:
        golden += [Golden(a, ad, "1", "anticommutator"), Golden(a, a, "0", "anticommutator")]
    return ModelSpec(
        name="majorana",
        symbols=_symbols([t, x, *eta], params, consts),
        solution=GeneralSolution(entries, consts),
        hamiltonian=H,
        golden=tuple(golden),
        golden_table=golden_table,
        golden_table_kind="anticommutator",
        notes=("momenta along the x axis, k_n = 2 pi n / L, n = 1..N; spin structure kept 2-component",),
        meta={"kind": "majorana", "N": N, "L": modes.L, "m": m, "modes": modes, "spinors": sp},
    )


def _reconstruct_commutator(A: Symbol, a: Symbol, ad: Symbol, anti: Callable[[Symbol, Symbol], Scalar]) -> Expr:
    """[A, N] with N = (ad a - a ad)/2 via [A, BC] = -B[A, C]+ + [A, B]+ C."""
    def comm(B: Symbol, C: Symbol) -> Expr:
        return -_sym(B) * anti(A, C) + anti(A, B) * _sym(C)

    return (comm(ad, a) - comm(a, ad)) * Fraction(1, 2)


def majorana_operator_check(model: ModelSpec, table: BracketTable) -> dict:
    """Two checks of the fermionic identity on the derived table.

    ``symbolic``: [a_s, N_s'] and [ad_s, N_s'] rebuilt from the derived
    anticommutators equal a_s' delta and -ad_s' delta.
    ``matrix``: Jordan-Wigner matrices with the same anticommutators satisfy
    the identity and those commutators numerically.
    """
    consts = [c for c in table.constants]
    ann = [c for c in consts if c.name.startswith("a_")]
    cre = {c.name: model.symbol(c.conjugate) for c in ann}

    def anti(A: Symbol, B: Symbol) -> Scalar:
        v = table.get(A, B)
        if v is None or not (v.is_scalar()):
            raise DerivationError(f"anticommutator {{{A.name}, {B.name}}} is not a number")
        return (v * I).as_scalar() if v else Scalar(0)

    symbolic_ok = True
    failures = []
    for A in ann + [cre[a.name] for a in ann]:
        for a in ann:
            got = _reconstruct_commutator(A, a, cre[a.name], anti)
            if A == a:
                want = _sym(a)
            elif A == cre[a.name]:
                want = -_sym(cre[a.name])
            else:
                want = Expr()
            if got != want:
                symbolic_ok = False
                failures.append(f"[{A.name}, N({a.name})] = {got}, expected {want}")

    # Jordan-Wigner representation of the annihilators
    n = len(ann)
    Z = np.diag([1.0, -1.0])
    lower = np.array([[0.0, 1.0], [0.0, 0.0]])
    ops = []
    for j in range(n):
        mats = [Z] * j + [lower] + [np.eye(2)] * (n - j - 1)
        op = mats[0]
        for mm in mats[1:]:
            op = np.kron(op, mm)
        ops.append(op.astype(complex))
    mat = {a.name: ops[j] for j, a in enumerate(ann)}
    for a in ann:
        mat[cre[a.name].name] = mat[a.name].conj().T
    names = list(mat)
    ac_dev = 0.0
    for A in names:
        for B in names:
            derived = complex(anti(model.symbol(A), model.symbol(B)))
            ac = mat[A] @ mat[B] + mat[B] @ mat[A]
            ac_dev = max(ac_dev, float(np.abs(ac - derived * np.eye(ac.shape[0])).max()))
    id_dev = 0.0
    for A in names:
        for a in ann:
            ad = cre[a.name].name
            Nop = 0.5 * (mat[ad] @ mat[a.name] - mat[a.name] @ mat[ad])
            lhs = mat[A] @ Nop - Nop @ mat[A]
            want = mat[a.name] if A == a.name else (-mat[ad] if A == ad else 0 * mat[A])
            id_dev = max(id_dev, float(np.abs(lhs - want).max()))
    return {
        "symbolic": symbolic_ok,
        "matrix_anticommutator_deviation": ac_dev,
        "matrix_commutator_deviation": id_dev,
        "failures": failures,
    }


# ----------------------------------------------------------------------
# light-cone scalar and chiral boson


def build_lightcone_scalar(N: int = 4, L: float = 2 * np.pi, m: float = 1.0) -> ModelSpec:
    """phi = sum_n c_n (a_n e^{-i(k+ x- + k- x+)/2} + c.c.), k- = m^2/k+, time x+."""
    modes = ModeSet.positive_modes(N, _check_positive("box length", L))
    m = _check_positive("mass", m)
    tp = Symbol("xplus", "time")
    xm = Symbol("xminus", "coordinate")
    phi = Symbol("phi", "dynamical-variable")
    pi = Symbol("pi", "momentum", partner="phi")
    kappa = _param("kappa", modes.kappa)
    Lp = _param("L", modes.L)
    mass = _param("m", m)
    K, Lx, M = _sym(kappa), _sym(Lp), _sym(mass)
    a = {n: _const(f"a_{n}", f"ad_{n}") for n in modes.indices}
    ad = {n: _const(f"ad_{n}", f"a_{n}") for n in modes.indices}
    c = {n: _param(f"c_{n}", 1 / np.sqrt(2 * modes.L * n * modes.kappa)) for n in modes.indices}
    field_ = Expr()
    H = Expr()
    squares = {}
    for n in modes.indices:
        kplus = K * n
        kminus = M * M * K.inverse() * Fraction(1, n)
        arg = -I * Fraction(1, 2) * (kplus * _sym(xm) + kminus * _sym(tp))
        field_ = field_ + _sym(c[n]) * (_sym(a[n]) * Expr.exp(arg) + _sym(ad[n]) * Expr.exp(-arg))
        H = H + kminus * (_sym(ad[n]) * _sym(a[n]) + _sym(a[n]) * _sym(ad[n])) * Fraction(1, 4)
        squares[c[n]] = Expr.scalar(Fraction(1, 2 * n)) * Lx.inverse() * K.inverse()
    entries = {phi: field_, pi: differentiate(field_, xm)}
    consts = tuple(sorted([*a.values(), *ad.values()], key=lambda s: s.sort_key))
    pairs = [(a[n].name, ad[n].name) for n in modes.indices]
    return ModelSpec(
        name="lightcone-scalar",
        symbols=_symbols([tp, xm, phi, pi, kappa, Lp, mass], a.values(), ad.values(), c.values()),
        solution=GeneralSolution(entries, consts),
        hamiltonian=H,
        golden=tuple(Golden(x_, y_, "1", "commutator") for x_, y_ in pairs[:2])
        + tuple(Golden(x_, x_, "0", "commutator") for x_, _ in pairs[:1]),
        golden_table=_ladder_table(pairs, "1", "-1"),
        golden_table_kind="commutator",
        squares=squares,
        notes=("light-cone time x+ drives the identification; pi = d phi / d x-", "only k+ > 0 modes"),
        meta={"kind": "lightcone", "N": N, "L": modes.L, "m": m, "modes": modes},
    )


def build_chiral_boson(N: int = 4, L: float = 2 * np.pi) -> ModelSpec:
    """phi = sum_n c_n (a_n e^{-i k (t + x)} + c.c.), k = 2 pi n / L > 0."""
    modes = ModeSet.positive_modes(N, _check_positive("box length", L))
    t = Symbol("t", "time")
    x = Symbol("x", "coordinate")
    phi = Symbol("phi", "dynamical-variable")
    kappa = _param("kappa", modes.kappa)
    Lp = _param("L", modes.L)
    K, Lx = _sym(kappa), _sym(Lp)
    a = {n: _const(f"a_{n}", f"ad_{n}") for n in modes.indices}
    ad = {n: _const(f"ad_{n}", f"a_{n}") for n in modes.indices}
    c = {n: _param(f"c_{n}", 1 / np.sqrt(modes.L * n * modes.kappa)) for n in modes.indices}
    field_ = Expr()
    H = Expr()
    squares = {}
    for n in modes.indices:
        k = K * n
        arg = -I * k * (_sym(t) + _sym(x))
        field_ = field_ + _sym(c[n]) * (_sym(a[n]) * Expr.exp(arg) + _sym(ad[n]) * Expr.exp(-arg))
        H = H + k * (_sym(ad[n]) * _sym(a[n]) + _sym(a[n]) * _sym(ad[n])) * Fraction(1, 2)
        squares[c[n]] = Expr.scalar(Fraction(1, n)) * Lx.inverse() * K.inverse()
    consts = tuple(sorted([*a.values(), *ad.values()], key=lambda s: s.sort_key))
    pairs = [(a[n].name, ad[n].name) for n in modes.indices]
    return ModelSpec(
        name="chiral-boson",
        symbols=_symbols([t, x, phi, kappa, Lp], a.values(), ad.values(), c.values()),
        solution=GeneralSolution({phi: field_}, consts),
        hamiltonian=H,
        golden=tuple(Golden(x_, y_, "1", "commutator") for x_, y_ in pairs[:2])
        + tuple(Golden(x_, x_, "0", "commutator") for x_, _ in pairs[:1]),
        golden_table=_ladder_table(pairs, "1", "-1"),
        golden_table_kind="commutator",
        squares=squares,
        notes=("same identification as the light-cone scalar with x+ -> t + x and k- -> 2k",),
        meta={"kind": "chiral", "N": N, "L": modes.L, "modes": modes},
    )


# ----------------------------------------------------------------------
# equal-time limits of the mode sums


def ladder_block(table: BracketTable) -> complex:
    """The common value b = {a_n, ad_n}; all other ladder entries must vanish."""
    b = None
    for k, l, v in table.nonzero():
        ck, cl = table.constants[k], table.constants[l]
        if ck.conjugate != cl.name:
            raise DerivationError(f"unexpected nonzero entry {{{ck.name}, {cl.name}}}")
        if not v.is_scalar():
            raise DerivationError("ladder entries must be numbers to extend the table")
        if ck.name.startswith("a_"):
            val = complex(v.as_scalar())
            if b is not None and val != b:
                raise DerivationError("ladder entries differ between modes")
            b = val
    if b is None:
        raise DerivationError("no ladder entries in the table")
    return b


def mode_coefficients(kind: str, which: str, N: int, L: float):
    """(p_n, q_n, beta_n): dF/da_n = p e^{-i beta x}, dF/dad_n = q e^{+i beta x} at equal time."""
    modes = ModeSet.positive_modes(N, L)
    k = modes.momenta
    if kind == "lightcone":
        c = 1 / np.sqrt(2 * L * k)
        beta = k / 2
    elif kind == "chiral":
        c = 1 / np.sqrt(L * k)
        beta = k
    else:
        raise ModelError(f"no equal-time mode functions for {kind!r}")
    if which == "phi":
        return c + 0j, c + 0j, beta
    if which == "pi" and kind == "lightcone":
        return -1j * beta * c, 1j * beta * c, beta
    raise ModelError(f"unknown field {which!r} for {kind}")


@dataclass
class LimitCheck:
    """A distributional limit of an equal-time commutator mode sum.

    ``target`` is ``sign``, ``delta`` or ``delta-derivative``; the commutator
    [F(x), G(x')] is compared with ``prefactor`` times the target in the
    separation u = x - x'.  Sign targets are compared pointwise (Cesaro
    averaged partial sums); delta targets after smearing with a normalised
    Gaussian of width ``sigma`` centred at ``mu``.
    """

    name: str
    model: str
    F: str
    G: str
    target: str
    prefactor: complex
    separations: tuple[float, ...] = (-2.0, -1.0, 0.5, 1.0, 2.0)
    N_schedule: tuple[int, ...] = (1000, 3000, 10000)
    L: float = 1000.0
    tol: float = 0.02
    sigma: float = 1.0
    mu: float = 0.3
    deviations: list[float] = field(default_factory=list)
    raw_deviations: list[float] = field(default_factory=list)
    values: list[list[complex]] = field(default_factory=list)
    passed: bool | None = None

    @property
    def max_deviation(self) -> float | None:
        return self.deviations[-1] if self.deviations else None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "model": self.model,
            "bracket": f"[{self.F}(x), {self.G}(x')]",
            "target": self.target,
            "prefactor": _complex_text(self.prefactor),
            "separations": list(self.separations),
            "N_schedule": list(self.N_schedule),
            "L": self.L,
            "tolerance": self.tol,
            "deviations": self.deviations,
            "raw_deviations": self.raw_deviations,
            "max_deviation": self.max_deviation,
            "pass": bool(self.passed),
        }


def _complex_text(z: complex) -> str:
    return f"{z.real:g}{z.imag:+g}i"


def commutator_terms(b: complex, kind: str, F: str, G: str, N: int, L: float):
    """Per-mode coefficients (A_n, B_n, beta_n): term_n(u) = A e^{-i beta u} + B e^{+i beta u}.

    The commutator is i times the classical bracket; the conjugate-pair
    entry {ad, a} = -b for even constants.
    """
    pF, qF, beta = mode_coefficients(kind, F, N, L)
    pG, qG, _ = mode_coefficients(kind, G, N, L)
    A = 1j * b * pF * qG
    B = -1j * b * qF * pG
    return A, B, beta


def mode_sum(b: complex, kind: str, F: str, G: str, N: int, L: float, u, cesaro: bool) -> np.ndarray:
    A, B, beta = commutator_terms(b, kind, F, G, N, L)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    w = 1 - np.arange(N) / N if cesaro else np.ones(N)
    out = np.zeros(u.shape, dtype=complex)
    for j, uu in enumerate(u):
        ph = np.exp(-1j * beta * uu)
        out[j] = np.sum(w * (A * ph + B * ph.conj()))
    return out


def smeared_sum(b: complex, kind: str, F: str, G: str, N: int, L: float, sigma: float, mu: float) -> complex:
    """Integral of g(u) times the mode sum, g normalised Gaussian (closed-form per mode)."""
    A, B, beta = commutator_terms(b, kind, F, G, N, L)
    damp = np.exp(-0.5 * (beta * sigma) ** 2)
    return complex(np.sum(A * np.exp(-1j * beta * mu) * damp + B * np.exp(1j * beta * mu) * damp))


def _gauss(u: float, sigma: float, mu: float) -> float:
    return float(np.exp(-((u - mu) ** 2) / (2 * sigma**2)) / (sigma * np.sqrt(2 * np.pi)))


def equal_time_limit(model: ModelSpec, table: BracketTable, check: LimitCheck) -> LimitCheck:
    """Fill ``check`` using the ladder value derived at small N, extended to N_schedule."""
    kind = model.meta.get("kind")
    b = ladder_block(table)
    check.deviations, check.raw_deviations, check.values = [], [], []
    for N in check.N_schedule:
        if check.target == "sign":
            u = np.array(check.separations)
            want = check.prefactor * np.sign(u)
            ces = mode_sum(b, kind, check.F, check.G, N, check.L, u, cesaro=True)
            raw = mode_sum(b, kind, check.F, check.G, N, check.L, u, cesaro=False)
            check.deviations.append(float(np.abs(ces - want).max()))
            check.raw_deviations.append(float(np.abs(raw - want).max()))
            check.values.append(list(ces))
        else:
            g0 = _gauss(0.0, check.sigma, check.mu)
            if check.target == "delta":
                want = check.prefactor * g0
            elif check.target == "delta-derivative":
                # integral of g(u) delta'(u) du = -g'(0)
                want = check.prefactor * (-g0 * check.mu / check.sigma**2)
            else:
                raise ModelError(f"unknown limit target {check.target!r}")
            got = smeared_sum(b, kind, check.F, check.G, N, check.L, check.sigma, check.mu)
            check.deviations.append(abs(got - want))
            check.raw_deviations.append(abs(got - want))
            check.values.append([got])
    check.passed = check.deviations[-1] < check.tol
    return check


def standard_limit_checks() -> list[tuple[str, LimitCheck]]:
    """The distributional limits checked by the acceptance suite."""
    return [
        (
            "lightcone-scalar",
            LimitCheck("lightcone [phi, phi] -> -(i/4) sign", "lightcone-scalar", "phi", "phi", "sign", -0.25j),
        ),
        (
            "lightcone-scalar",
            LimitCheck(
                "lightcone [phi, pi] -> (i/2) delta", "lightcone-scalar", "phi", "pi", "delta", 0.5j, tol=1e-3
            ),
        ),
        (
            "lightcone-scalar",
            LimitCheck(
                "lightcone [pi, pi] -> (i/2) delta'", "lightcone-scalar", "pi", "pi", "delta-derivative", 0.5j, tol=1e-3
            ),
        ),
        (
            "chiral-boson",
            LimitCheck("chiral [phi, phi] -> -(i/2) sign", "chiral-boson", "phi", "phi", "sign", -0.5j),
        ),
    ]
