import numpy as np
import pytest

from sygjms import normalform
from sygjms.model import boundary_invariants

from conftest import MODELS

_cache = {}


def gauge(sol, name):
    if name not in _cache:
        _cache[name] = normalform.geodesic_gauge(sol(name))
    return _cache[name]


@pytest.mark.parametrize("name", ["ball2", "ball3"])
def test_ball_geodesic_defining_function(sol, name):
    # Poincare ball: rhat = 2(1 - rho)/(1 + rho) = 2r/(2 - r)
    gg = gauge(sol, name)
    r = np.linspace(0.05, 0.9, 9)
    np.testing.assert_allclose(gg.rhat(r), 2 * r / (2 - r), rtol=1e-9)


@pytest.mark.parametrize("name", list(MODELS))
def test_normal_form_identities(sol, name):
    rep = normalform.normal_form_check(gauge(sol, name))
    assert rep["max_residual"] <= 1e-8
    assert rep["max_jet_error"] <= 1e-8
    for route in ("formal", "numeric", "closed_form"):
        assert abs(rep[route]["H_hat"]) <= 1e-8


@pytest.mark.parametrize("name", list(MODELS))
def test_unit_gradient(sol, name):
    assert gauge(sol, name).unit_gradient_residual(m=8) <= 1e-8


def test_exact_hat_route_is_exact(sol):
    # slab2 is an exact geometry: the formal hat invariants are rationals
    gg = gauge(sol, "slab2")
    h = gg.hat["formal"]
    assert h.exact and h.H == 0
    base = boundary_invariants(gg.geometry)
    assert h.Rbar == 2 * (base.R - base.LoNormSq)


def test_n2_note(sol):
    assert any("n = 2" in x for x in gauge(sol, "ball2").notes)
