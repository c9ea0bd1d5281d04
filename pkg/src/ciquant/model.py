"""Model definitions and the sectioned model-file format.

A model file looks like::

    [model]
    name = christ-lee

    [symbols]
    t : time
    r, theta, z : variable
    p_r : momentum of=r
    a, b : constant

    [lagrangian]
    1/2*(r_dot^2 + r^2*(theta_dot - z)^2) - 1/2*r^2

    [solution]
    r = a*cos(t) + b*sin(t)
    ...

Every dynamical variable ``q`` gets an implicit velocity symbol ``q_dot``.
See ``docs/model_format.md`` for the full grammar.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .expr import Expr, ExprError, Parity, Symbol, differentiate, evaluate_numeric, substitute
from .parser import ParseError, parse

ROLE_ALIASES = {
    "time": "time",
    "coordinate": "coordinate",
    "variable": "dynamical-variable",
    "dynamical-variable": "dynamical-variable",
    "momentum": "momentum",
    "constant": "integration-constant",
    "integration-constant": "integration-constant",
    "parameter": "parameter",
    "mode-index": "mode-index",
}
_ROLE_SHORT = {
    "time": "time",
    "coordinate": "coordinate",
    "dynamical-variable": "variable",
    "momentum": "momentum",
    "integration-constant": "constant",
    "parameter": "parameter",
    "mode-index": "mode-index",
}
SECTIONS = ("model", "symbols", "lagrangian", "hamiltonian", "solution", "inverse", "gauge", "source_term", "golden")


class ModelError(ValueError):
    pass


class MomentumInconsistencyError(ModelError):
    pass


class GaugeError(ModelError):
    pass


@dataclass(frozen=True)
class Golden:
    """An expected bracket: ``{f, g}``, ``[f, g]`` or ``[f, g]+`` equal to ``value``.

    ``f`` and ``g`` are expression texts over the model's symbols; variables
    and momenta are replaced by their solution before propagation.
    Commutator-form values are compared against ``i * {f, g}``.
    """

    f: str
    g: str
    value: str
    kind: str = "bracket"  # bracket | commutator | anticommutator

    def render(self) -> str:
        if self.kind == "bracket":
            return f"{{{self.f}, {self.g}}} = {self.value}"
        plus = "+" if self.kind == "anticommutator" else ""
        return f"[{self.f}, {self.g}]{plus} = {self.value}"


@dataclass(frozen=True)
class GeneralSolution:
    entries: dict[Symbol, Expr]
    constants: tuple[Symbol, ...]


@dataclass(frozen=True)
class SourceTerm:
    coupling: Symbol
    variables: tuple[Symbol, ...]
    solution: dict[Symbol, Expr]


@dataclass(frozen=True)
class ModelSpec:
    name: str
    symbols: dict[str, Symbol]
    solution: GeneralSolution
    lagrangian: Expr | None = None
    hamiltonian: Expr | None = None
    gauge_note: str = ""
    source_term: SourceTerm | None = None
    inverse: dict[Symbol, Expr] = field(default_factory=dict)
    golden: tuple[Golden, ...] = ()
    # exact values of squared normalisation parameters, c^2 -> value
    squares: dict[Symbol, Expr] = field(default_factory=dict)
    notes: tuple[str, ...] = ()
    check_momenta: bool = True
    # expected constant table {(C_k, C_l): value}; unlisted pairs are expected 0
    golden_table: dict[tuple[str, str], str] = field(default_factory=dict)
    golden_table_kind: str = "bracket"
    # truncation data for field models (N, L, mass, mode list, ...)
    meta: dict = field(default_factory=dict)

    @property
    def time(self) -> Symbol:
        ts = [s for s in self.symbols.values() if s.role == "time"]
        return ts[0]

    @property
    def coordinates(self) -> tuple[Symbol, ...]:
        return tuple(s for s in self.symbols.values() if s.role == "coordinate")

    @property
    def basis_vars(self) -> tuple[Symbol, ...]:
        return (self.time,) + self.coordinates

    @property
    def constants(self) -> tuple[Symbol, ...]:
        return self.solution.constants

    @property
    def variables(self) -> tuple[Symbol, ...]:
        return tuple(s for s in self.symbols.values() if s.role == "dynamical-variable")

    @property
    def momenta(self) -> tuple[Symbol, ...]:
        return tuple(s for s in self.symbols.values() if s.role == "momentum")

    @property
    def parameters(self) -> tuple[Symbol, ...]:
        return tuple(s for s in self.symbols.values() if s.role == "parameter")

    def symbol(self, name: str) -> Symbol:
        try:
            return self.symbols[name]
        except KeyError:
            raise ModelError(f"model {self.name} has no symbol {name!r}") from None

    def parse(self, text: str) -> Expr:
        return parse(text, self.symbols)

    def on_shell(self, e: Expr) -> Expr:
        """Replace variables, velocities and momenta by the general solution."""
        return substitute(e, self.on_shell_bindings())

    def on_shell_bindings(self) -> dict[Symbol, Expr]:
        b = dict(self.solution.entries)
        t = self.time
        for s in self.symbols.values():
            if s.role == "velocity" and s.partner in self.symbols:
                q = self.symbols[s.partner]
                if q in b:
                    b[s] = differentiate(b[q], t)
        return b

    def is_even(self) -> bool:
        return not any(c.odd for c in self.constants)

    def momentum_of(self, q: Symbol) -> Symbol | None:
        for p in self.momenta:
            if p.partner == q.name:
                return p
        return None

    def velocity_of(self, q: Symbol) -> Symbol:
        return self.symbols[f"{q.name}_dot"]

    def reduce_squares(self, e: Expr) -> Expr:
        """Apply the exact ``c^2 -> value`` relations of normalisation parameters."""
        if not self.squares:
            return e
        out = Expr()
        for (factors, expo), c in e.monomials():
            term = Expr.scalar(c)
            for s, p in factors:
                if s in self.squares and abs(p) >= 2:
                    q, r = divmod(abs(p), 2)
                    sq = self.squares[s] ** (q if p > 0 else -q)
                    term = term * sq * Expr.symbol(s, r if p > 0 else -r)
                else:
                    term = term * Expr.symbol(s, p)
            if expo is not None:
                term = term * Expr.exp(expo)
            out = out + term
        return out

    def with_updates(self, **kw) -> "ModelSpec":
        return replace(self, **kw)


# ----------------------------------------------------------------------
# validation


def validate(m: ModelSpec) -> list[str]:
    """Raise on contract violations; return non-fatal warnings."""
    warnings: list[str] = []
    times = [s for s in m.symbols.values() if s.role == "time"]
    if len(times) != 1:
        raise ModelError(f"model {m.name} must declare exactly one time symbol")
    if times[0].odd:
        raise ModelError("the time symbol must be even")
    for s in m.symbols.values():
        if s.conjugate is not None:
            other = m.symbols.get(s.conjugate)
            if other is None:
                raise ModelError(f"{s.name}: conjugate {s.conjugate!r} is not declared")
            if other.conjugate != s.name:
                raise ModelError(f"conjugate pairing {s.name} <-> {s.conjugate} is not symmetric")
    if m.lagrangian is None and m.hamiltonian is None:
        raise ModelError(f"model {m.name} needs a lagrangian or a hamiltonian")
    n_odd = sum(1 for c in m.constants if c.odd)
    if n_odd > 64:
        raise ModelError("at most 64 odd constants are supported")
    n_vars = len(m.variables)
    if len(m.constants) > 2 * n_vars and not m.coordinates:
        raise ModelError(f"M = {len(m.constants)} constants exceeds 2N = {2 * n_vars}")
    for q in m.solution.entries:
        if q.role not in ("dynamical-variable", "momentum"):
            raise ModelError(f"solution entry {q.name} is not a variable or momentum")
    used = set()
    for e in m.solution.entries.values():
        used |= e.free_symbols()
    for c in m.constants:
        if c not in used:
            raise GaugeError(
                f"constant {c.name} never appears in the solution "
                "(a dropped degree of freedom; is the gauge fixed?)"
            )
    if m.hamiltonian is not None:
        bad = [s.name for s in m.hamiltonian.free_symbols() if s.role not in ("integration-constant", "parameter")]
        if bad:
            raise ModelError(f"hamiltonian must be expressed in constants, found {bad}")
    if m.lagrangian is not None and m.check_momenta:
        check_momenta(m)
    warnings.extend(independence_warnings(m))
    return warnings


def check_momenta(m: ModelSpec) -> None:
    """Stated momenta must equal dL/dq_dot evaluated on the solution."""
    binding = m.on_shell_bindings()
    for q in m.variables:
        p = m.momentum_of(q)
        if p is None or p not in m.solution.entries:
            continue
        v = m.velocity_of(q)
        expected = substitute(differentiate(m.lagrangian, v), binding)
        if expected != m.solution.entries[p]:
            raise MomentumInconsistencyError(
                f"{p.name} = {m.solution.entries[p]} but dL/d{v.name} on shell is {expected}"
            )


def independence_warnings(m: ModelSpec, samples: int = 3, seed: int = 7) -> list[str]:
    """Numeric Jacobian-rank probe of d(q, p)/dC at random points (even models only)."""
    if not m.is_even() or m.coordinates:
        return []
    rng = np.random.default_rng(seed)
    entries = list(m.solution.entries.values())
    consts = m.constants
    h = 1e-6
    best = 0
    for _ in range(samples):
        point = {c: complex(*rng.normal(size=2)) for c in consts}
        ts = rng.uniform(0.1, 2.0, size=max(2, len(consts)))
        rows = []
        try:
            for t in ts:
                env0 = {**point, m.time: t}
                for e in entries:
                    row = []
                    for c in consts:
                        up = dict(env0)
                        dn = dict(env0)
                        up[c] = point[c] + h
                        dn[c] = point[c] - h
                        row.append((evaluate_numeric(e, up) - evaluate_numeric(e, dn)) / (2 * h))
                    rows.append(row)
        except ExprError:
            return []
        best = max(best, np.linalg.matrix_rank(np.array(rows), tol=1e-6))
    if best < len(consts):
        return [f"Jacobian d(q,p)/dC has numeric rank {best} < M = {len(consts)}; constants may not be independent"]
    return []


# ----------------------------------------------------------------------
# file format


def _split_top(text: str, sep: str = ",") -> list[str]:
    out, depth, cur = [], 0, []
    for ch in text:
        if ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth -= 1
        if ch == sep and depth == 0:
            out.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    out.append("".join(cur))
    return [s.strip() for s in out]


def _parse_symbol_line(line: str, lineno: int) -> list[Symbol]:
    if ":" not in line:
        raise ParseError(f"line {lineno}: symbol declaration needs ':'")
    names, spec = line.split(":", 1)
    names = [n.strip() for n in names.split(",") if n.strip()]
    words = spec.split()
    if not words:
        raise ParseError(f"line {lineno}: missing role")
    role = ROLE_ALIASES.get(words[0])
    if role is None:
        raise ParseError(f"line {lineno}: unknown role {words[0]!r}")
    parity = Parity.EVEN
    conj = partner = None
    value = None
    for w in words[1:]:
        if w == "odd":
            parity = Parity.ODD
        elif w == "even":
            parity = Parity.EVEN
        elif w.startswith("conj="):
            conj = w[5:]
        elif w.startswith("of="):
            partner = w[3:]
        elif w.startswith("value="):
            value = complex(w[6:].replace("i", "j"))
        else:
            raise ParseError(f"line {lineno}: unknown attribute {w!r}")
    if conj is not None and len(names) != 1:
        raise ParseError(f"line {lineno}: conj= needs a single name")
    for n in names:
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_']*", n) or n in ("i", "sin", "cos", "exp"):
            raise ParseError(f"line {lineno}: bad symbol name {n!r}")
    return [Symbol(n, role, parity, conjugate=conj, value=value, partner=partner) for n in names]


_GOLDEN = re.compile(r"^(?P<open>[\[{])(?P<body>.*)(?P<close>[\]}])(?P<plus>\+?)\s*=\s*(?P<value>.+)$")


def _parse_golden(line: str, lineno: int) -> Golden:
    m = _GOLDEN.match(line.strip())
    if not m:
        raise ParseError(f"line {lineno}: golden entries look like '{{f, g}} = value'")
    parts = _split_top(m.group("body"))
    if len(parts) != 2:
        raise ParseError(f"line {lineno}: a bracket needs exactly two arguments")
    if m.group("open") == "{":
        kind = "bracket"
    else:
        kind = "anticommutator" if m.group("plus") else "commutator"
    return Golden(parts[0], parts[1], m.group("value").strip(), kind)


def load_model(source: str) -> ModelSpec:
    """Parse and validate a model file."""
    sections: dict[str, list[tuple[int, str]]] = {}
    current = None
    for lineno, raw in enumerate(source.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        m = re.fullmatch(r"\s*\[(\w+)\]\s*", line)
        if m:
            current = m.group(1)
            if current not in SECTIONS:
                raise ParseError(f"line {lineno}: unknown section [{current}]")
            sections.setdefault(current, [])
            continue
        if current is None:
            raise ParseError(f"line {lineno}: content before the first section")
        sections[current].append((lineno, line.strip()))

    name = "model"
    notes: list[str] = []
    for lineno, line in sections.get("model", []):
        k, _, v = line.partition("=")
        if k.strip() == "name":
            name = v.strip()
        elif k.strip() == "note":
            notes.append(v.strip())
        else:
            raise ParseError(f"line {lineno}: unknown [model] key {k.strip()!r}")

    table: dict[str, Symbol] = {}
    for lineno, line in sections.get("symbols", []):
        for s in _parse_symbol_line(line, lineno):
            if s.name in table:
                raise ParseError(f"line {lineno}: symbol {s.name} declared twice")
            table[s.name] = s
    for s in list(table.values()):
        if s.role == "dynamical-variable":
            vname = f"{s.name}_dot"
            if vname in table:
                raise ParseError(f"{vname} is reserved for the velocity of {s.name}")
            table[vname] = Symbol(vname, "velocity", s.parity, partner=s.name)

    def expr_of(key: str) -> Expr | None:
        lines = sections.get(key)
        if not lines:
            return None
        return parse(" ".join(l for _, l in lines), table)

    lagrangian = expr_of("lagrangian")
    hamiltonian = expr_of("hamiltonian")

    def assignments(lines) -> dict[Symbol, Expr]:
        out = {}
        for lineno, line in lines:
            k, eq, v = line.partition("=")
            if not eq:
                raise ParseError(f"line {lineno}: expected 'name = expression'")
            k = k.strip()
            if k not in table:
                raise ParseError(f"line {lineno}: undeclared identifier {k!r}")
            out[table[k]] = parse(v, table)
        return out

    entries = assignments(sections.get("solution", []))
    constants = tuple(s for s in table.values() if s.role == "integration-constant")
    inverse = assignments(sections.get("inverse", []))

    source_term = None
    st_lines = sections.get("source_term", [])
    if st_lines:
        coupling = None
        variables: tuple[Symbol, ...] = ()
        rest = []
        for lineno, line in st_lines:
            k, _, v = line.partition("=")
            k = k.strip()
            if k == "coupling":
                coupling = table.get(v.strip())
                if coupling is None:
                    raise ParseError(f"line {lineno}: undeclared coupling {v.strip()!r}")
            elif k == "variables":
                try:
                    variables = tuple(table[x] for x in _split_top(v))
                except KeyError as err:
                    raise ParseError(f"line {lineno}: undeclared variable {err}") from None
            else:
                rest.append((lineno, line))
        if coupling is None:
            raise ParseError("[source_term] needs 'coupling = <parameter>'")
        source_term = SourceTerm(coupling, variables, assignments(rest))

    gauge = " ".join(l for _, l in sections.get("gauge", []))
    golden = tuple(_parse_golden(l, n) for n, l in sections.get("golden", []))
    for g in golden:
        for text in (g.f, g.g, g.value):
            parse(text, table)

    model = ModelSpec(
        name=name,
        symbols=table,
        solution=GeneralSolution(entries, constants),
        lagrangian=lagrangian,
        hamiltonian=hamiltonian,
        gauge_note=gauge,
        source_term=source_term,
        inverse=inverse,
        golden=golden,
        notes=tuple(notes),
    )
    validate(model)
    return model


def _value_text(v: complex) -> str:
    v = complex(v)
    if v.imag == 0:
        return repr(v.real)
    return f"{v.real!r}{v.imag:+}i"


def save_model(m: ModelSpec) -> str:
    """Canonical text form; ``load_model(save_model(m)) == m``."""
    out = ["[model]", f"name = {m.name}"] + [f"note = {n}" for n in m.notes] + ["", "[symbols]"]
    for s in m.symbols.values():
        if s.role == "velocity":
            continue
        words = [_ROLE_SHORT[s.role]]
        if s.odd:
            words.append("odd")
        if s.conjugate:
            words.append(f"conj={s.conjugate}")
        if s.partner:
            words.append(f"of={s.partner}")
        if s.value is not None:
            words.append(f"value={_value_text(s.value)}")
        out.append(f"{s.name} : {' '.join(words)}")
    if m.lagrangian is not None:
        out += ["", "[lagrangian]", str(m.lagrangian)]
    if m.hamiltonian is not None:
        out += ["", "[hamiltonian]", str(m.hamiltonian)]
    out += ["", "[solution]"]
    out += [f"{k.name} = {v}" for k, v in m.solution.entries.items()]
    if m.inverse:
        out += ["", "[inverse]"]
        out += [f"{k.name} = {v}" for k, v in m.inverse.items()]
    if m.gauge_note:
        out += ["", "[gauge]", m.gauge_note]
    if m.source_term is not None:
        st = m.source_term
        out += ["", "[source_term]", f"coupling = {st.coupling.name}"]
        out.append("variables = " + ", ".join(v.name for v in st.variables))
        out += [f"{k.name} = {v}" for k, v in st.solution.items()]
    if m.golden:
        out += ["", "[golden]"]
        out += [g.render() for g in m.golden]
    return "\n".join(out) + "\n"


def models_equal(a: ModelSpec, b: ModelSpec) -> bool:
    keys = ("name", "lagrangian", "hamiltonian", "gauge_note", "source_term", "inverse", "golden", "notes")
    if any(getattr(a, k) != getattr(b, k) for k in keys):
        return False
    if list(a.symbols.items()) != list(b.symbols.items()):
        return False
    return a.solution == b.solution


def symbol_table(symbols: Mapping[str, Symbol]) -> dict[str, Symbol]:
    return dict(symbols)
