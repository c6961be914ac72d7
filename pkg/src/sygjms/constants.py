"""Universal constants c_{q,s}, d_{2p+1,s} of the boundary expansion and the
residues c_q that normalize the extrinsic GJMS operators.

Everything is a finite product or a short recursion in exact rationals.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial

import sympy as sp

_s = sp.Symbol("s")


@dataclass(frozen=True)
class Pole:
    """A simple pole of c_{q,s} (or d) at ``location`` with the given residue."""

    location: Fraction
    residue: Fraction


def _frac(x):
    if isinstance(x, Fraction):
        return x
    x = sp.nsimplify(x)
    return Fraction(int(x.p), int(x.q))


@lru_cache(maxsize=None)
def _c_expr(q, n):
    """c_{q,s} as a sympy rational function of s (internal; used for Laurent data)."""
    m = sp.Rational(n, 2)
    if q == 0:
        return sp.Integer(1)
    if q == 1:
        return sp.Integer(0)
    if q % 2 == 0:
        p = q // 2
        prod = sp.Integer(1)
        for i in range(1, p + 1):
            prod *= 1 / (_s - m - i)
        return sp.Integer(-1) ** p * prod / (2 ** (2 * p) * sp.factorial(p))
    p = (q - 1) // 2
    num = 2 * sp.Integer(-1) ** (p - 1) * _c_expr(2 * p - 2, n) + _c_expr(2 * p - 1, n)
    return sp.cancel(num / (2 * (2 * p + 1) * (_s - m - p - sp.Rational(1, 2))))


def _eval(expr, s):
    s = sp.Rational(Fraction(s).numerator, Fraction(s).denominator)
    num, den = sp.fraction(sp.cancel(expr))
    if den.subs(_s, s) == 0:
        return Pole(_frac(s), _frac(sp.residue(expr, _s, s)))
    return _frac(expr.subs(_s, s))


def c_coeff(q, s, n):
    """c_{q,s} at rational s; a ``Pole`` record if s is a pole."""
    if q < 0:
        raise ValueError("q must be nonnegative")
    if q == 1:
        return Fraction(0)
    s = Fraction(s)
    if q % 2 == 0:
        p = q // 2
        m = Fraction(n, 2)
        val = Fraction((-1) ** p, 2 ** (2 * p) * factorial(p))
        for i in range(1, p + 1):
            d = s - m - i
            if d == 0:
                return _eval(_c_expr(q, n), s)
            val /= d
        return val
    return _eval(_c_expr(q, n), s)


def d_coeff(p, s, n):
    """d_{2p+1,s} = (n + 2p - 2 - s)/(2n) (-1)^p c_{2p,s}."""
    c = c_coeff(2 * p, s, n)
    if isinstance(c, Pole):
        return _d_pole(p, s, n)
    return (Fraction(n + 2 * p - 2) - Fraction(s)) / (2 * n) * (-1) ** p * c


def _d_pole(p, s, n):
    expr = (n + 2 * p - 2 - _s) / (2 * n) * sp.Integer(-1) ** p * _c_expr(2 * p, n)
    return _eval(expr, s)


def residue_c(q, n):
    """c_q = Res_{s=(n+q)/2} c_{q,s}."""
    if q < 1:
        raise ValueError("q must be positive")
    if q == 1:
        return Fraction(0)
    if q % 2 == 0:
        p = q // 2
        return Fraction((-1) ** p, 2 ** (2 * p) * factorial(p) * factorial(p - 1))
    p = (q - 1) // 2
    s0 = Fraction(n + q, 2)
    a = c_coeff(2 * p - 2, s0, n)
    b = c_coeff(2 * p - 1, s0, n)
    return (2 * (-1) ** (p - 1) * a + b) / (2 * (2 * p + 1))


def laurent_residue(q, n):
    """Residue of c_{q,s} at s = (n+q)/2 by exact Laurent expansion (cross-check route)."""
    s0 = sp.Rational(n + q, 2)
    return _frac(sp.residue(_c_expr(q, n), _s, s0))


def c_expr(q, n):
    """c_{q,s} as a sympy expression in the symbol ``s``."""
    return _c_expr(q, n)


def coeff_table(n, qmax, spots=()):
    """JSON-ready table of residues c_q and spot values c_{q,s}, d_{2p+1,s}."""
    rows = []
    for q in range(1, qmax + 1):
        row = {"q": q, "c_q": str(residue_c(q, n))}
        vals = {}
        for s in spots:
            v = c_coeff(q, s, n)
            vals[str(Fraction(s))] = (
                {"pole": str(v.location), "residue": str(v.residue)} if isinstance(v, Pole) else str(v)
            )
        row["c_qs"] = vals
        if q % 2 == 1:
            dv = {}
            for s in spots:
                v = d_coeff((q - 1) // 2, s, n)
                dv[str(Fraction(s))] = (
                    {"pole": str(v.location), "residue": str(v.residue)} if isinstance(v, Pole) else str(v)
                )
            row["d_qs"] = dv
        rows.append(row)
    return {"n": n, "qmax": qmax, "rows": rows}

