import numpy as np
import pytest

from ciquant.brackets import derive_table
from ciquant.library import builtin
from ciquant.model import load_model
from ciquant.oracle import (
    OracleError,
    compare,
    convergence_in_h,
    default_constants,
    estimate_bracket_table,
    ode_cross_check,
    oracle_check,
    sample_solution,
)

from test_brackets import TWO_FREE


@pytest.fixture(scope="module")
def christ_lee():
    m = builtin("christ-lee")
    return m, derive_table(m)


def test_finite_differences_match_closed_form(christ_lee):
    m, _ = christ_lee
    b = sample_solution(m, {"a": 0.4, "b": -1.3}, np.array([[0.5], [1.2]]), h=1e-4)
    r = b.entries.index("r")
    t = b.grid[:, 0]
    assert np.allclose(b.values[r], 0.4 * np.cos(t) - 1.3 * np.sin(t))
    assert np.allclose(b.dt[r], -0.4 * np.sin(t) - 1.3 * np.cos(t), atol=1e-7)
    assert np.allclose(b.dC[0, r], np.cos(t), atol=1e-7)
    assert np.allclose(b.dH, [0.4, -1.3], atol=1e-7)


def test_christ_lee_estimate(christ_lee):
    m, t = christ_lee
    res = oracle_check(m, t)
    assert res["pass"] and res["max_deviation"] < 1e-6 and res["grid_points"] == 64


def test_second_order_convergence(christ_lee):
    m, t = christ_lee
    conv = convergence_in_h(m, t, h0=1e-2)
    assert 3.5 <= conv["ratio"] <= 4.5


def test_bosonic_and_free_particle():
    for name in ("bosonic-oscillator", "free-particle"):
        m = builtin(name)
        assert oracle_check(m, derive_table(m))["pass"]


def test_regularized_free_particle_at_finite_eta():
    from ciquant.brackets import regularized_model

    aug = regularized_model(builtin("free-particle"))
    t = derive_table(aug)
    assert str(t["a", "b"]) == "1"
    res = oracle_check(aug, t)
    assert res["pass"] and res["max_deviation"] < 1e-6


def test_sigma_n2_even_sector():
    m = builtin("sigma-o2", N=2)
    res = oracle_check(m, derive_table(m), tol=1e-6)
    assert res["pass"] and res["base_points"] == len(m.constants)


def test_wrong_table_is_caught(christ_lee):
    m, t = christ_lee
    from ciquant.expr import Expr

    bad = type(t)(t.constants, {**t.values, (0, 1): Expr.scalar(2), (1, 0): Expr.scalar(-2)})
    res = compare(bad, estimate_bracket_table(sample_solution(m)))
    assert not res["pass"] and res["worst_entry"] in ("{a, b}", "{b, a}")


def test_indeterminate_sets_agree():
    m = load_model(TWO_FREE)
    t = derive_table(m)
    res = oracle_check(m, t)
    assert res["indeterminate_agree"] and res["pass"]
    assert not oracle_check(m, t, n_points=1)["indeterminate_agree"]


def test_one_base_point_cannot_separate_monomials():
    m = builtin("chiral-boson", N=2)
    t = derive_table(m)
    assert oracle_check(m, t)["pass"]
    single = oracle_check(m, t, n_points=1)
    assert not single["indeterminate_agree"]


def test_odd_models_rejected():
    m = builtin("fermionic-oscillator")
    with pytest.raises(OracleError):
        sample_solution(m)


def test_missing_constant_values():
    m = builtin("christ-lee")
    with pytest.raises(OracleError):
        sample_solution(m, [1.0])
    assert default_constants(m).shape == (2,)


def test_euler_lagrange_integration():
    res = ode_cross_check(builtin("bosonic-oscillator"), [0.3, 0.3])
    assert res["max_deviation"] < 1e-8
    assert ode_cross_check(builtin("lightcone-scalar", N=1), [0.1, 0.1]) is None
