from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ciquant.brackets import check_golden, check_golden_table, derive_table, eq1_residuals, model_hamiltonian
from ciquant.expr import Expr, ExprError, Symbol
from ciquant.fields import (
    SIGMA,
    LimitCheck,
    ModeSet,
    SpinorPair,
    build_chiral_boson,
    build_lightcone_scalar,
    build_majorana,
    equal_time_limit,
    exact_site_value,
    ladder_block,
    majorana_operator_check,
    mode_sum,
    sigma_field_brackets,
    sigma_lattice_bracket,
    smeared_sum,
    truncate_sigma,
)
from ciquant.model import ModelError
from ciquant.scalar import Scalar


@pytest.fixture(scope="module")
def sigma2():
    m = truncate_sigma(N=2)
    return m, derive_table(m)


def test_mode_sets():
    ms = ModeSet.symmetric(3, 6.0)
    assert ms.indices == (-3, -2, -1, 1, 2, 3) and ms.N == 3
    assert np.allclose(ms.momenta, np.array(ms.indices) * np.pi / 3)
    assert ModeSet.positive_modes(2, 1.0).indices == (1, 2)
    for bad in (lambda: ModeSet.symmetric(0, 1.0), lambda: ModeSet((1, 1), 1.0), lambda: ModeSet((0,), 1.0, True)):
        with pytest.raises(ModelError):
            bad()


@pytest.mark.parametrize("builder", [truncate_sigma, build_majorana, build_lightcone_scalar, build_chiral_boson])
def test_bad_truncations_rejected(builder):
    with pytest.raises(ModelError):
        builder(N=0)
    with pytest.raises(ModelError):
        builder(N=1, L=-1.0)


def test_sigma_table_and_lattice(sigma2):
    m, t = sigma2
    assert len(m.constants) == 2 + 4 * 2
    # k and -k share a frequency; the joint time x site identification still has full rank
    assert t.rank == t.n_unknowns == 45
    assert t.determined and check_golden_table(m, t)["pass"]
    assert t["a_1", "as_1"] == Expr.scalar(Scalar(0, -1))
    assert t["a_1", "as_2"] == Expr() and t["a_1", "a_m1"] == Expr()
    lat = sigma_lattice_bracket(m, t)
    assert lat.sites == 5 and lat.is_lattice_delta()


def test_sigma_field_brackets(sigma2):
    m, t = sigma2
    lat = sigma_lattice_bracket(m, t)
    rng = np.random.default_rng(3)
    res = sigma_field_brackets(lat, 2 * np.pi, rng.uniform(0, 2 * np.pi, 5), rng.normal(size=5))
    assert res.max_deviation < 1e-12
    # at theta = 0: phi = (1, 0) so only the tangential direction survives
    flat = sigma_field_brackets(lat, 2 * np.pi, np.zeros(5), np.zeros(5))
    assert np.allclose(flat.phi_pi[0], [[0, 0], [0, 1]])


def test_sigma_hamilton_equations(sigma2):
    m, t = sigma2
    H = model_hamiltonian(m)
    assert all(not m.reduce_squares(r) for r in eq1_residuals(m, t, H).values())


def test_exact_site_value_roots_of_unity():
    kappa, L = Symbol("kappa", "parameter"), Symbol("L", "parameter")
    K, Lx = Expr.symbol(kappa), Expr.symbol(L)
    total = Expr()
    for j in range(5):
        total = total + Expr.exp(K * Lx * Scalar(0, Fraction(j, 5)))
    assert exact_site_value(total, kappa, L) == Expr()
    assert exact_site_value(Expr.exp(K * Lx * Scalar(0, 3)), kappa, L) == Expr.scalar(1)
    half = exact_site_value(Expr.exp(K * Lx * Scalar(0, Fraction(1, 2))), kappa, L)
    assert half == Expr.scalar(-1)
    with pytest.raises(ExprError):
        exact_site_value(Expr.exp(K * Scalar(0, 1)), kappa, L)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 50.0), st.floats(0.1, 5.0), st.integers(0, 2))
def test_spinor_relations(kmag, m, axis):
    k = np.zeros(3)
    k[axis] = kmag
    sp = SpinorPair.build(k, m)
    assert sp.residual() < 1e-12
    sk = np.einsum("i,ijk->jk", k, SIGMA)
    for which in (1, 2):
        lhs = sp.spin_sum(which) @ (sp.k0 * np.eye(2) + sk)
        assert np.allclose(lhs, m / 2 * np.eye(2), atol=1e-9 * max(1.0, sp.k0**2))


def test_spinor_at_rest():
    sp = SpinorPair.build(0.0, 1.0)
    assert np.allclose(sp.w1, np.eye(2) / np.sqrt(2))
    assert np.allclose(sp.spin_sum(2), np.eye(2) / 2)


def test_majorana_n1():
    m = build_majorana(N=1)
    t = derive_table(m)
    assert t.determined and check_golden_table(m, t)["pass"]
    op = majorana_operator_check(m, t)
    assert not op["failures"]
    assert op["matrix_anticommutator_deviation"] < 1e-12


@pytest.mark.parametrize("builder", [build_lightcone_scalar, build_chiral_boson])
def test_scalar_ladders(builder):
    m = builder(N=2)
    t = derive_table(m)
    assert check_golden_table(m, t)["pass"]
    assert all(g["pass"] for g in check_golden(m, t))
    assert ladder_block(t) == pytest.approx(-1j)


def lightcone_partial_sum(N, L, u):
    # [phi(x), phi(x')] = sum_n c_n^2 (e^{-i k_n u/2} - e^{i k_n u/2}), c_n^2 = 1/(2 L n kappa)
    kappa = 2 * np.pi / L
    n = np.arange(1, N + 1)
    return np.sum(-2j * np.sin(n * kappa * u / 2) / (2 * L * n * kappa))


@pytest.mark.parametrize("u", [-2.0, 0.5, 1.0, 3.0])
def test_lightcone_mode_sum_matches_direct_sum(u):
    m = build_lightcone_scalar(N=1)
    b = ladder_block(derive_table(m))
    got = mode_sum(b, "lightcone", "phi", "phi", 500, 100.0, [u], cesaro=False)[0]
    assert got == pytest.approx(lightcone_partial_sum(500, 100.0, u), abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 20.0), st.integers(1, 400), st.booleans())
def test_sign_mode_sums_are_odd(u, N, cesaro):
    for kind, b in (("lightcone", -1j), ("chiral", -1j)):
        s = mode_sum(b, kind, "phi", "phi", N, 50.0, [u, -u, 0.0], cesaro=cesaro)
        assert s[0] == pytest.approx(-s[1], abs=1e-12)
        assert abs(s[2]) < 1e-12


def test_smeared_delta_independent_quadrature():
    m = build_lightcone_scalar(N=1)
    b = ladder_block(derive_table(m))
    N, L, sigma, mu = 200, 50.0, 1.0, 0.3
    u = np.linspace(mu - 10, mu + 10, 8001)
    g = np.exp(-((u - mu) ** 2) / 2) / np.sqrt(2 * np.pi)
    vals = mode_sum(b, "lightcone", "phi", "pi", N, L, u, cesaro=False)
    quad = np.trapezoid(g * vals, u)
    assert smeared_sum(b, "lightcone", "phi", "pi", N, L, sigma, mu) == pytest.approx(quad, abs=1e-8)


def test_limit_check_small_schedule():
    m = build_chiral_boson(N=1)
    t = derive_table(m)
    chk = LimitCheck("chiral", "chiral-boson", "phi", "phi", "sign", -0.5j, N_schedule=(100, 1000), L=200.0, tol=0.1)
    equal_time_limit(m, t, chk)
    assert chk.deviations[1] < chk.deviations[0] and chk.passed
    assert len(chk.values[0]) == len(chk.separations) == 5
    assert chk.to_dict()["max_deviation"] == chk.deviations[-1]
