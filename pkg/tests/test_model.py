import math
from pathlib import Path

import numpy as np
import pytest

from sygjms import model
from sygjms.model import GeometryError, Mode, PolyProfile, make_geometry

from conftest import MODELS

GEOM_DIR = Path(__file__).resolve().parents[1] / "geometries"


def test_shipped_geometry_files_load():
    names = sorted(p.name for p in GEOM_DIR.glob("*.json"))
    assert {"ball2.json", "ball_euclid.json", "slab2.json", "slab3.json"} <= set(names)
    g = make_geometry(str(GEOM_DIR / "ball_euclid.json"))
    assert g.kind == "WarpedBall" and g.n == 3


def test_sphere_volume():
    assert model.sphere_volume(2) == pytest.approx(4 * math.pi)
    assert model.sphere_volume(3) == pytest.approx(2 * math.pi ** 2)


def test_basic_shape(geom):
    assert geom("ball2").r_max == 1.0 and geom("ball2").components == 1
    assert geom("slab2").r_max == 0.5 and geom("slab2").components == 2
    assert geom("ball3").boundary_area() == pytest.approx(2 * math.pi ** 2)


def test_invariants_euclidean_ball(geom):
    # unit sphere in flat space: L = k, H = n, R = n(n-1), ambient flat
    for name, n in (("ball2", 2), ("ball3", 3)):
        inv = model.boundary_invariants(geom(name))
        assert inv.H == n and inv.LoNormSq == 0
        assert inv.R == n * (n - 1) and inv.Rbar == 0
        assert list(inv.Ric) == [n - 1] * n


def test_invariants_slab2_by_hand(geom):
    # dr^2 + (1+r)^2 dx^2 + (1-r)^2 dy^2: L = diag(-1, 1), K_xy = 1 at r = 0
    inv = model.boundary_invariants(geom("slab2"))
    assert inv.H == 0 and list(inv.L) == [-1, 1] and inv.LoNormSq == 2
    assert inv.Rbar == 2 and list(inv.RbarRic) == [1, 1] and inv.R == 0


@pytest.mark.parametrize("name", list(MODELS))
def test_fermi_and_contracted_identities(geom, name):
    g = geom(name)
    assert max(model.fermi_check(g).values()) <= 1e-10
    inv = model.boundary_invariants(g)
    assert abs(float(inv.lrcont_residual())) <= 1e-12
    assert abs(float(inv.codazzi_residual())) <= 1e-12


@pytest.mark.parametrize("spec, msg", [
    ({"kind": "Cone", "n": 2, "profiles": [[1]]}, "unknown kind"),
    ({"kind": "TorusSlab", "n": 2, "profiles": [[1, 1]]}, "one profile"),
    ({"kind": "TorusSlab", "n": 2, "profiles": [[1, 3], [1, -3]]}, "degenerate"),
    ({"kind": "WarpedBall", "n": 2, "profiles": [[1, 1]]}, "singular center"),
])
def test_rejects_bad_specs(spec, msg):
    with pytest.raises(GeometryError, match=msg):
        make_geometry(spec)


def test_mode_labels():
    assert Mode().trivial and Mode(k=(0, 0)).trivial
    assert Mode(k=(1, 0), parity="odd").label() == "k=(1,0),odd"
    assert Mode(l=2).label() == "l=2"


def test_constant_rescale_scales_invariants(geom):
    g = geom("slab3")
    inv = model.boundary_invariants(g)
    c = 0.3
    _, inv2 = model.conformal_rescale(g, c)
    e = math.exp(c)
    assert inv2.H == pytest.approx(inv.H / e, abs=1e-12)
    assert inv2.LoNormSq == pytest.approx(inv.LoNormSq / e ** 2, rel=1e-12)
    assert inv2.Rbar == pytest.approx(inv.Rbar / e ** 2, rel=1e-12)


@pytest.mark.parametrize("name", ["slab2", "ball3"])
def test_radial_rescale_matches_conformal_laws(geom, name):
    g = geom(name)
    if g.kind == "WarpedBall":
        # even about the center, written in the native variable x in [0, 1]
        om = PolyProfile([0.1, 0.0, 0.2])
        x0 = 1.0
    else:
        om = PolyProfile([0.1, 0.2, -0.2])      # symmetric about the mid-plane
        x0 = 0.0
    w = [float(om(np.array([x0]), d)[0]) for d in range(3)]
    if g.kind == "WarpedBall":
        w[1] = -w[1]                     # r = 1 - x
    _, inv2 = model.conformal_rescale(g, om)
    pred = model.lemma52_predict(model.boundary_invariants(g), *w)
    for key in ("H", "Rbar", "LoNormSq", "R"):
        assert float(getattr(inv2, key)) == pytest.approx(pred[key], abs=1e-9)
    np.testing.assert_allclose([float(x) for x in inv2.RbarRic], pred["RbarRic"], atol=1e-9)


def test_slab_omega_must_be_mirror_symmetric(geom):
    with pytest.raises(GeometryError, match="mid-plane"):
        model.conformal_rescale(geom("slab2"), PolyProfile([0.1, -0.3, 0.2]))
