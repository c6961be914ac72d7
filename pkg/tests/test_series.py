from fractions import Fraction

import math
import pytest
from hypothesis import given, settings, strategies as st

from sygjms.series import PolyLogSeries, SeriesError

ORDER = 6
fracs = st.fractions(min_value=-4, max_value=4, max_denominator=12)


def series(min_k=0, logs=True, order=ORDER):
    key = st.tuples(st.integers(min_k, order), st.integers(0, 2 if logs else 0))
    return st.dictionaries(key, fracs, max_size=6).map(
        lambda t: PolyLogSeries(t, 0, order, True))


def unit_free():
    """log-free series vanishing at r = 0 (argument of exp)."""
    return series(min_k=1, logs=False)


many = settings(max_examples=1000, deadline=None)


@many
@given(series(), series(), series())
def test_ring_axioms(a, b, c):
    assert (a + b).equals(b + a)
    assert (a * b).equals(b * a)
    assert ((a + b) + c).equals(a + (b + c))
    assert ((a * b) * c).equals(a * (b * c))
    assert (a * (b + c)).equals(a * b + a * c)
    assert (a - a).equals(PolyLogSeries({}, 0, ORDER, True))


@many
@given(unit_free())
def test_exp_log_round_trip(a):
    assert a.exp(ORDER).log(ORDER).equals(a)
    one = PolyLogSeries.constant(Fraction(1), order=ORDER)
    assert (one + a).log(ORDER).exp(ORDER).equals(one + a)


@many
@given(series(), series())
def test_leibniz(a, b):
    lhs = (a * b).derivative()
    rhs = a.derivative() * b + a * b.derivative()
    assert lhs.equals(rhs)


def test_derivative_of_log_monomial():
    s = PolyLogSeries({(2, 1): Fraction(1)}, 0, 4)
    d = s.derivative()
    assert d.coeff(1, 1) == 2 and d.coeff(1, 0) == 1


def test_coefficient_beyond_order_raises():
    with pytest.raises(SeriesError):
        PolyLogSeries({(0, 0): Fraction(1)}, 0, 3).coeff(4)


def test_float_exp_matches_math():
    s = PolyLogSeries({(1, 0): 1.0}, 0, 12, exact=False)
    assert abs(s.exp(12)(0.3) - math.exp(0.3)) < 1e-12


def test_power_and_reciprocal():
    s = PolyLogSeries.from_coeffs([Fraction(1), Fraction(2), Fraction(-1)], order=5)
    inv = s.reciprocal(5)
    assert (s * inv).equals(PolyLogSeries.constant(Fraction(1), order=5))
    half = s.power(Fraction(1, 2), 5)
    assert (half * half).equals(s)


def test_revert_is_compositional_inverse():
    s = PolyLogSeries.from_coeffs([0, Fraction(1), Fraction(3), Fraction(-2)], order=5)
    t = s.revert()
    ident = PolyLogSeries.from_coeffs([0, Fraction(1)], order=5)
    assert s.compose(t).equals(ident)
