from fractions import Fraction
from math import factorial

import pytest
import sympy as sp

from sygjms import constants
from sygjms.constants import Pole, c_coeff, d_coeff, laurent_residue, residue_c


@pytest.mark.parametrize("n", range(1, 7))
@pytest.mark.parametrize("p", range(1, 6))
def test_even_residue_closed_form(n, p):
    want = Fraction((-1) ** p, 2 ** (2 * p) * factorial(p) * factorial(p - 1))
    assert residue_c(2 * p, n) == want
    assert laurent_residue(2 * p, n) == want


@pytest.mark.parametrize("n", range(1, 7))
def test_odd_residues(n):
    assert residue_c(1, n) == 0
    # hand values from the odd recursion: c_3 = 1/3, c_5 = 1/15
    assert residue_c(3, n) == Fraction(1, 3)
    assert residue_c(5, n) == Fraction(1, 15)
    for p in range(1, 5):
        assert residue_c(2 * p + 1, n) > 0
        assert residue_c(2 * p + 1, n) == laurent_residue(2 * p + 1, n)


def test_pole_reported_with_residue():
    v = c_coeff(2, 2, 2)
    assert isinstance(v, Pole) and v.location == 2 and v.residue == Fraction(-1, 4)


def test_spot_value_matches_symbolic():
    for q in range(0, 7):
        expr = constants.c_expr(q, 3)
        for s in (Fraction(1, 3), Fraction(-2, 7), Fraction(11, 5)):
            want = sp.Rational(s.numerator, s.denominator)
            assert c_coeff(q, s, 3) == Fraction(str(sp.nsimplify(expr.subs(sp.Symbol("s"), want))))


def test_d_coeff_definition():
    s, n = Fraction(1, 3), 3
    for p in range(0, 4):
        want = (n + 2 * p - 2 - s) / (2 * n) * (-1) ** p * c_coeff(2 * p, s, n)
        assert d_coeff(p, s, n) == want


def test_table_is_json_ready():
    import json
    t = constants.coeff_table(3, 4, [Fraction(5, 2), Fraction(1, 2)])
    json.dumps(t)
