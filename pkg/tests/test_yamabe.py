import math

import numpy as np
import pytest
import sympy as sp

from sygjms import yamabe
from sygjms.yamabe import YamabeError

from conftest import MODELS


def hyperbolic_ball_volume(n):
    """Exact expansion of vol({rho < 1 - eps}) for 4|dx|^2/(1 - rho^2)^2 (independent oracle)."""
    rho, eps = sp.symbols("rho eps", positive=True)
    omega = sp.Integer(2) * sp.pi ** sp.Rational(n + 1, 2) / sp.gamma(sp.Rational(n + 1, 2))
    F = sp.integrate(sp.apart((2 / (1 - rho ** 2)) ** (n + 1) * rho ** n, rho), rho)
    vol = omega * (F.subs(rho, 1 - eps) - F.subs(rho, 0))
    ser = sp.expand(sp.series(vol, eps, 0, 1).removeO())
    ser = sp.expand(sp.expand_log(ser, force=True))
    logc = ser.coeff(sp.log(eps))
    rest = sp.expand(ser - logc * sp.log(eps))
    V = sum(t for t in rest.as_ordered_terms() if not t.has(eps))
    c = [float(rest.coeff(eps, -(n - k))) for k in range(n)]
    return c, float(-logc), float(V)


@pytest.mark.parametrize("name, n", [("ball2", 2), ("ball3", 3)])
def test_hyperbolic_ball_exact(sol, name, n):
    s = sol(name)
    r = np.linspace(0.0, 1.0, 101)
    assert np.max(np.abs(s.ut(r) - (1 - r / 2))) <= 1e-12
    assert s.residual_norm <= 1e-12
    assert float(s.Lcal) == 0
    assert s.formal.coeff(1) == -0.5 and all(s.formal.coeff(k) == 0 for k in range(2, n + 1))


@pytest.mark.parametrize("name, n", [("ball2", 2), ("ball3", 3)])
def test_volume_ledger_against_exact_volume(sol, name, n):
    c, E, V = hyperbolic_ball_volume(n)
    led = yamabe.volume_expansion(sol(name))
    np.testing.assert_allclose(led.c[:n], c, rtol=1e-10, atol=1e-10)
    assert led.E == pytest.approx(E, abs=1e-9)
    assert led.V == pytest.approx(V, rel=1e-7)


def test_ball2_volume_frozen():
    # frozen from the sympy oracle above
    c, E, V = hyperbolic_ball_volume(2)
    assert V == pytest.approx(math.pi / 2 - 2 * math.pi * math.log(2), rel=1e-14)
    assert E == pytest.approx(-2 * math.pi, rel=1e-14)


@pytest.mark.parametrize("name", list(MODELS))
def test_global_solve_residuals(sol, name):
    s = sol(name)
    assert s.residual_norm <= 1e-9
    assert yamabe.defect_norm(s) <= 1e-7
    # the global solution agrees with the formal series near M up to r^{n+1}
    assert math.isfinite(s.u_next) and s.overlap_C < 1e3


@pytest.mark.parametrize("name", list(MODELS))
def test_contour_jets_match_formal(geom, sol, name):
    g = geom(name)
    jets = yamabe.contour_ut_jets(g)
    f = sol(name).formal
    for k, a in enumerate(jets["coefficients"], start=1):
        assert a == pytest.approx(float(f.coeff(k)), abs=1e-9)


@pytest.mark.parametrize("name", list(MODELS))
def test_log_coefficient_is_E_density(sol, name):
    s = sol(name)
    led = yamabe.volume_expansion(s)
    n = s.n
    area = s.geometry.boundary_area()
    assert led.E == pytest.approx(float(led.v[n - 1]) * area * s.geometry.components, abs=1e-9)


def test_tolerance_floor(geom):
    with pytest.raises(YamabeError):
        yamabe.sy_global_solve(geom("ball2"), tol=1e-14)
