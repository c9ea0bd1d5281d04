from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ciquant.scalar import I, ONE, ZERO, Scalar

fracs = st.fractions(max_denominator=50).filter(lambda q: abs(q) < 100)
gauss = st.builds(Scalar, fracs, fracs)


def test_i_squared():
    assert I * I == Scalar(-1)
    assert I ** -1 == -I


def test_division_exact():
    z = Scalar(Fraction(1, 3), 2) / Scalar(1, -1)
    assert z * Scalar(1, -1) == Scalar(Fraction(1, 3), 2)


def test_zero_division():
    with pytest.raises(ZeroDivisionError):
        ONE / ZERO


def test_str_forms():
    assert str(Scalar(Fraction(-1, 2))) == "-1/2"
    assert str(Scalar(0, -1)) == "-i"
    assert complex(Scalar(Fraction(1, 4), 3)) == 0.25 + 3j


@given(gauss, gauss, gauss)
def test_field_axioms(a, b, c):
    assert (a + b) * c == a * c + b * c
    assert a * b == b * a
    if b:
        assert (a / b) * b == a
    assert (a * b).conjugate() == a.conjugate() * b.conjugate()
