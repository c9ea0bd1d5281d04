from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ciquant.brackets import (
    InconsistentSystemError,
    IndeterminateBracketError,
    InvalidSolutionError,
    RegularizationError,
    bracket_of,
    build_identification_system,
    check_golden,
    check_golden_table,
    derive_table,
    eq1_residuals,
    eta_limit,
    eta_regularized_derivation,
    eta_zero_model,
    graded_bracket,
    jacobi_and_leibniz_check,
    model_hamiltonian,
    solve_bracket_table,
)
from ciquant.exterior import crosscheck_brackets
from ciquant.expr import Expr, differentiate
from ciquant.library import MECHANICAL, builtin
from ciquant.linsolve import MonomialField, NotMonomial, ParameterField, gauss_solve
from ciquant.model import load_model
from ciquant.scalar import Scalar


def val(model, table, f, g):
    return bracket_of(model, table, f, g).value


@pytest.fixture(scope="module")
def christ_lee():
    m = builtin("christ-lee")
    return m, derive_table(m)


@pytest.fixture(scope="module")
def fermion():
    m = builtin("fermionic-oscillator")
    return m, derive_table(m)


def test_christ_lee_table(christ_lee):
    m, t = christ_lee
    assert t["a", "b"] == Expr.scalar(1) and t["b", "a"] == Expr.scalar(-1)
    assert t["a", "a"] == Expr() and t.determined and t.residual_zero
    assert val(m, t, "r", "p_r") == Expr.scalar(1)
    for f, g in [("theta", "p_theta"), ("z", "p_z"), ("r", "theta"), ("p_r", "p_r")]:
        assert val(m, t, f, g) == Expr()


def test_christ_lee_phase_space_brackets_are_time_free(christ_lee):
    m, t = christ_lee
    raw = bracket_of(m, t, "r^2", "p_r").raw
    assert raw == m.on_shell(m.parse("2*r"))
    assert bracket_of(m, t, "r^2", "p_r").value == m.parse("2*r")


def test_fermionic_table(fermion):
    m, t = fermion
    minus_i = Expr.scalar(Scalar(0, -1))
    assert t["a", "abar"] == minus_i and t["abar", "a"] == minus_i
    assert t["a", "a"] == Expr() and t["abar", "abar"] == Expr()
    assert val(m, t, "psi", "psibar") == minus_i
    assert val(m, t, "psi", "Pi_psi") == Expr.scalar(Fraction(-1, 2))


def test_fermionic_matches_exterior_algebra(fermion):
    m, t = fermion
    rows = crosscheck_brackets(m, t, [("psi", "psibar"), ("psi", "Pi_psi"), ("psibar", "Pi_psibar"), ("psi", "psi")])
    assert all(r["deviation"] < 1e-12 for r in rows)
    assert [r["derived"] for r in rows][:2] == ["-i", "-1/2"]


def test_bosonic_normalisation():
    m = builtin("bosonic-oscillator")
    t = derive_table(m)
    assert t["a", "astar"] == m.parse("-i/2*omega^-1")
    assert val(m, t, "q", "p") == Expr.scalar(1)


def test_bosonic_identification_rows():
    m = builtin("bosonic-oscillator")
    H = model_hamiltonian(m)
    assert H == m.parse("2*omega^2*a*astar")
    q = m.symbol("q")
    sys = build_identification_system(m, H, {q: m.solution.entries[q]})
    assert len(sys.rows) == 2 and sys.unknowns == [(0, 1)]


def test_free_particle_plain_and_regularized():
    m = builtin("free-particle")
    plain = derive_table(m)
    reg = eta_regularized_derivation(m)
    assert plain["a", "b"] == reg["a", "b"] == Expr.scalar(1)
    assert reg["b", "a"] == Expr.scalar(-1)
    z = eta_zero_model(m)
    assert derive_table(z)["a", "b"] == Expr.scalar(1)


@pytest.mark.parametrize("name", list(MECHANICAL))
def test_goldens_and_self_consistency(name):
    m = builtin(name)
    t = derive_table(m)
    assert all(g["pass"] for g in check_golden(m, t))
    H = model_hamiltonian(m)
    assert all(not r for r in eq1_residuals(m, t, H).values())
    for s, f in m.solution.entries.items():
        assert graded_bracket(f, H, t) == differentiate(f, m.time)
    audit = jacobi_and_leibniz_check(t, samples=10)
    assert not audit["failures"]


def test_corrupted_golden_is_named(christ_lee):
    m, t = christ_lee
    bad = m.with_updates(golden=tuple(g if g.f != "r" or g.g != "p_r" else type(g)(g.f, g.g, "2", g.kind) for g in m.golden))
    failed = [g for g in check_golden(bad, t) if not g["pass"]]
    assert [g["bracket"] for g in failed] == ["{r, p_r}"]
    assert failed[0]["expected"] == "2" and failed[0]["derived"] == "1"


TWO_FREE = """\
[symbols]
t : time
q1, q2 : variable
a1, b1, a2, b2 : constant
[hamiltonian]
1/2*(b1^2 + b2^2)
[solution]
q1 = a1 + b1*t
q2 = a2 + b2*t
"""


def test_indeterminate_pairs_reported_not_zeroed():
    m = load_model(TWO_FREE)
    t = derive_table(m)
    assert t.indeterminate == [("a1", "a2")]
    assert t["a1", "a2"] is None and t["a1", "b1"] == Expr.scalar(1)
    assert t["a1", "b2"] == Expr() and t["b1", "b2"] == Expr()
    with pytest.raises(IndeterminateBracketError):
        bracket_of(m, t, "q1", "q2")
    assert bracket_of(m, t, "q1", "b1").value == Expr.scalar(1)


def test_inconsistent_system_names_rows():
    text = "[symbols]\nt : time\nq : variable\na, b : constant\n[hamiltonian]\n1/2*b^2\n[solution]\nq = a*cos(t) + b\n"
    with pytest.raises(InconsistentSystemError, match="q @"):
        derive_table(load_model(text))


def test_time_dependent_hamiltonian_rejected():
    m = builtin("christ-lee")
    with pytest.raises(InvalidSolutionError):
        build_identification_system(m, m.parse("a*t"))


def test_empty_system_flagged():
    text = "[symbols]\nt : time\nq : variable\na : constant\n[hamiltonian]\n0\n[solution]\nq = a\n"
    t = derive_table(load_model(text))
    assert t.empty_system is False  # a single even constant has no unknowns
    text2 = TWO_FREE.replace("1/2*(b1^2 + b2^2)", "0").replace("+ b1*t", "+ b1").replace("+ b2*t", "+ b2")
    t2 = derive_table(load_model(text2))
    assert t2.empty_system and t2.notes


def test_golden_table_mismatch_detected():
    m = builtin("lightcone-scalar", N=1)
    t = derive_table(m)
    assert check_golden_table(m, t)["pass"]
    key = next(iter(m.golden_table))
    bad = m.with_updates(golden_table={**m.golden_table, key: "2"})
    res = check_golden_table(bad, t)
    assert not res["pass"] and res["mismatches"][0]["pair"] == "{%s, %s}" % key


def test_monomial_field_agrees_with_rational_functions():
    m = builtin("lightcone-scalar", N=2)
    H = model_hamiltonian(m)
    sys = build_identification_system(m, H)
    fast = solve_bracket_table(sys)
    slow = solve_bracket_table(sys, force_params=(m.symbol("kappa"),))
    assert any(isinstance(f, MonomialField) for f in fast.field_.values())
    assert all(isinstance(f, ParameterField) for f in slow.field_.values())
    assert fast.values == slow.values


def test_monomial_field_refuses_sums():
    m = builtin("bosonic-oscillator")
    f = MonomialField([m.symbol("omega")])
    with pytest.raises(NotMonomial):
        f.to_field(m.parse("omega + 1"))
    x = f.to_field(m.parse("2*omega^-1")) * f.to_field(m.parse("i*omega^3"))
    assert f.to_expr(x) == m.parse("2*i*omega^2")


def test_eta_limit_diverging_entry():
    m = builtin("free-particle")
    eta = m.symbol("eta")
    fld = ParameterField([eta])
    ratio = fld.to_field(m.parse("1 + eta")) / fld.to_field(m.parse("1 + 2*eta^2"))
    assert fld.to_expr(eta_limit(fld, ratio, eta)) == Expr.scalar(1)
    assert eta_limit(fld, fld.to_field(m.parse("eta^2")), eta) == fld.zero
    with pytest.raises(RegularizationError):
        eta_limit(fld, fld.to_field(m.parse("eta^-1")), eta)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.lists(st.integers(-5, 5), min_size=3, max_size=3), min_size=3, max_size=5), st.lists(st.integers(-5, 5), min_size=3, max_size=3))
def test_gauss_solve_exact(A, x):
    rows = [({j: Fraction(a) for j, a in enumerate(r) if a}, Fraction(sum(a * b for a, b in zip(r, x)))) for r in A]
    sol = gauss_solve(rows, 3, Fraction(0), Fraction(1))
    assert not sol.inconsistent
    for j, v in sol.values.items():
        if j not in sol.dependent:
            assert v == x[j] or sol.free
    if sol.determined:
        assert [sol.values[j] for j in range(3)] == x
