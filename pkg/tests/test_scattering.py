from fractions import Fraction

import numpy as np
import pytest
from scipy.special import gamma as G

from sygjms import normalform, scattering, verify, yamabe
from sygjms.model import Mode, boundary_invariants
from sygjms.scattering import ScatteringError
from sygjms.series import PolyLogSeries


def ball_S(n, l, s):
    """Hyperbolic ball scattering eigenvalue on degree-l harmonics (closed form)."""
    return 2 ** (n - 2 * s) * G(n / 2 - s) * G(l + s) / (G(s - n / 2) * G(l + n - s))


@pytest.mark.parametrize("name, n", [("ball2", 2), ("ball3", 3)])
@pytest.mark.parametrize("l", [0, 1, 4])
def test_ball_against_gamma_quotient(sol, name, n, l):
    for s in (n / 2 + 0.17, n / 2 + 0.61, n - 0.2, n + 0.3):
        got = scattering.scatter_solve(sol(name), s, Mode(l=l)).S_value
        assert got == pytest.approx(ball_S(n, l, s), rel=1e-7)


def test_functional_equation_slab(sol):
    s_ = sol("slab2")
    m = Mode(k=(1, 1), parity="odd")
    for s in (1.1, 1.3):
        a = scattering.scatter_solve(s_, s, m).S_value
        b = scattering.scatter_solve(s_, 2 - s, m).S_value
        assert a * b == pytest.approx(1.0, abs=1e-8)


def hat_solution(s):
    hg = normalform.hat_geometry(s)
    return yamabe.SYSolution(geometry=hg, formal=PolyLogSeries.constant(Fraction(1), order=hg.n), Lcal=0)


@pytest.mark.parametrize("name", ["ball2", "slab2", "ball3", "slab3"])
def test_frobenius_low_orders_exact(sol, name):
    s_ = sol(name)
    n = s_.n
    inv = boundary_invariants(s_.geometry)
    hs = hat_solution(s_)
    hinv = boundary_invariants(hs.geometry)
    for s in (Fraction(1, 3), Fraction(-2, 7)):
        F, _ = scattering.frobenius_expand(s_, s)
        assert F.coeff(1) == (n - s) / (2 * n) * inv.H
        Fh, _ = scattering.frobenius_expand(hs, s)
        assert Fh.coeff(1) == 0
        assert Fh.coeff(2) == (n - s) / (4 * (n - 1) * (n + 2 - 2 * s)) * (hinv.R - hinv.LoNormSq)


def test_residue_matches_operator_formula(sol):
    s_ = sol("slab2")
    m = Mode(k=(1, 0))
    r = scattering.residue_extract(s_, 2, m)
    assert r.value == pytest.approx(verify.p_formula(s_.geometry, 2, m), rel=1e-6)


def test_q1_residue_vanishes(sol):
    r = scattering.residue_extract(sol("slab2"), 1, Mode(k=(1, 0)))
    assert r.value is None and r.extra["vanishes"]


def test_q_curvature_ball2_is_half_scalar(sol):
    q = scattering.q_curvature(sol("ball2"))
    assert q.value == pytest.approx(0.5 * 2.0, abs=1e-8)


def test_s_derivative_ball_against_oracle(sol):
    # d/ds of the l = 0 Gamma quotient at s = n, by a fine central difference
    h = 1e-5
    want = (ball_S(2, 0, 2 + h) - ball_S(2, 0, 2 - h)) / (2 * h)
    d = scattering.s_derivative(sol("ball2"))
    assert d.value == pytest.approx(want, rel=1e-6)


def test_domain_errors(sol):
    s_ = sol("ball2")
    with pytest.raises(ScatteringError, match="strip"):
        scattering.scatter_solve(s_, 2.7)
    with pytest.raises(ScatteringError, match="n/2"):
        scattering.scatter_solve(s_, 1.0)
    with pytest.raises(ScatteringError, match="integer"):
        scattering.fractional_op(s_, 0.5)
    with pytest.raises(ScatteringError, match="parity"):
        scattering.scatter_solve(sol("slab2"), 1.3, Mode(k=(1, 0), parity="none"))


def test_fractional_op_is_S(sol):
    s_ = sol("ball3")
    d = scattering.fractional_op(s_, 0.3, Mode(l=1))
    assert d.S_value == pytest.approx(ball_S(3, 1, 1.8), rel=1e-7)


def test_pole_flag_near_pole(sol):
    d = scattering.scatter_solve(sol("ball2"), 1.49, Mode(l=1))
    assert d.pole_flag
    assert np.isfinite(d.S_value)
