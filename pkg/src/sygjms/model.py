"""Separable model backgrounds and their boundary geometry.

Two families are supported, both written as dr^2 + h_r near the boundary with
r the distance to the boundary:

* ``TorusSlab``: T^n x [0, w] with h_r = sum psi_i(r)^2 dx_i^2, unit-period
  torus coordinates.  Numerics run on [0, w/2] with a mirror condition at the
  midplane, so the two ends are identical.
* ``WarpedBall``: d rho^2 + phi(rho)^2 g_{S^n} on [0, L], boundary at rho = L,
  r = L - rho and psi(r) = phi(L - r) for all n fibre directions.

All curvature is reduced to radial scalars.  In an orthonormal frame
(e_0 = d/dr, e_i) the curvature operator is diagonal with sectional
curvatures K_0i = -psi_i''/psi_i and K_ij = -psi_i' psi_j'/(psi_i psi_j)
(torus) or (1 - psi'^2)/psi^2 (round fibres).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from . import cheb
from .series import PolyLogSeries


class GeometryError(ValueError):
    pass


def _num(c):
    """Parse a JSON coefficient: ints and 'p/q' strings stay exact."""
    if isinstance(c, bool):
        raise GeometryError("bad coefficient")
    if isinstance(c, int):
        return Fraction(c)
    if isinstance(c, str):
        return Fraction(c)
    if isinstance(c, Fraction):
        return c
    return float(c)


# profiles, in the native variable x (r for the slab, rho for the ball)

def _arr(x):
    """Float array, or complex if complex input (contour evaluations)."""
    x = np.asarray(x)
    return x if np.iscomplexobj(x) else x.astype(float)


class PolyProfile:
    kind = "poly"

    def __init__(self, coeffs):
        self.coeffs = tuple(_num(c) for c in coeffs)
        self.exact = all(isinstance(c, Fraction) for c in self.coeffs)
        self._fc = np.array([float(c) for c in self.coeffs])

    def __call__(self, x, d=0):
        p = np.polynomial.Polynomial(self._fc)
        return p.deriv(d)(_arr(x)) if d else p(_arr(x))

    def taylor(self, x0, order):
        """Coefficients of phi(x0 + t) in powers of t, up to t^order."""
        exact = self.exact and isinstance(x0, (int, Fraction))
        cs = list(self.coeffs) if exact else [float(c) for c in self.coeffs]
        x0 = Fraction(x0) if exact else float(x0)
        out = []
        for m in range(order + 1):
            acc = Fraction(0) if exact else 0.0
            for k in range(m, len(cs)):
                acc += cs[k] * math.comb(k, m) * x0 ** (k - m)
            out.append(acc)
        return out, exact

    def to_list(self):
        return [str(c) if isinstance(c, Fraction) and c.denominator != 1 else
                (int(c) if isinstance(c, Fraction) else c) for c in self.coeffs]


class TrigProfile:
    """a0 + sum_k a_k cos(k f x) + b_k sin(k f x), coefficients [a0, a1, b1, a2, b2, ...]."""

    kind = "trig"

    def __init__(self, coeffs, freq=1.0):
        cs = [float(_num(c)) for c in coeffs]
        self.a0 = cs[0]
        self.ab = [(cs[i], cs[i + 1] if i + 1 < len(cs) else 0.0) for i in range(1, len(cs), 2)]
        self.freq = float(freq)
        self.exact = False
        self.coeffs = cs

    def __call__(self, x, d=0):
        x = _arr(x)
        out = np.full_like(x, self.a0 if d == 0 else 0.0)
        for k, (a, b) in enumerate(self.ab, start=1):
            w = k * self.freq
            ph = d * np.pi / 2
            out = out + w ** d * (a * np.cos(w * x + ph) + b * np.sin(w * x + ph))
        return out

    def taylor(self, x0, order):
        return [float(self(np.array([float(x0)]), m)[0]) / math.factorial(m)
                for m in range(order + 1)], False

    def to_list(self):
        return self.coeffs


class ChebProfile:
    """Numeric profile (Chebyshev interpolant) with boundary Taylor data supplied."""

    kind = "cheb"

    def __init__(self, series, boundary_taylor=None):
        self.series = series
        self.exact = False
        self.boundary_taylor = boundary_taylor
        self._derivs = [series]

    def __call__(self, x, d=0):
        while len(self._derivs) <= d:
            self._derivs.append(self._derivs[-1].deriv())
        return self._derivs[d](_arr(x))

    def taylor(self, x0, order):
        return [float(self(np.array([float(x0)]), m)[0]) / math.factorial(m)
                for m in range(order + 1)], False

    def to_list(self):
        return list(map(float, self.series.coef))


def make_profile(coeffs, basis):
    if basis == "poly":
        return PolyProfile(coeffs)
    if basis == "trig":
        return TrigProfile(coeffs)
    raise GeometryError(f"unknown basis {basis!r}")


# boundary invariants

@dataclass(frozen=True)
class BoundaryInvariants:
    """Boundary data at r = 0; tensors are diagonal with mixed indices."""

    n: int
    H: float
    L: tuple
    Lo: tuple
    LoNormSq: float
    Lo3: float
    R: float
    Ric: tuple
    Rbar: float
    RbarRic: tuple
    RbarNormal: tuple
    Ric00: float
    dRbar: float
    dRic00: float
    exact: bool = False

    def as_dict(self):
        def f(v):
            if isinstance(v, tuple):
                return [float(x) for x in v]
            if v is None or isinstance(v, (bool, int)):
                return v
            return float(v)
        return {k: f(getattr(self, k)) for k in self.__dataclass_fields__}

    def lrcont_residual(self):
        """L^{mu nu} Rbar_{0 mu nu 0} vs the contraction identity (LRconteq)."""
        lhs = sum(a * b for a, b in zip(self.Lo, self.RbarNormal))
        rhs = (sum(a * b for a, b in zip(self.Lo, self.RbarRic))
               - sum(a * b for a, b in zip(self.Lo, self.Ric))
               + Fraction(self.n - 2, self.n) * self.H * self.LoNormSq - self.Lo3)
        return lhs - rhs

    def codazzi_residual(self):
        """Scalar form of the contracted Codazzi/Gauss relation on radial models.

        With all tangential gradients zero, the twice-contracted second Bianchi
        identity at M reads d_r Rbar = 2 d_r Ric00 - 2 H Ric00 + 2 L^{mu nu} Rbar_{mu nu}
        (all ambient quantities in the frame of dr^2 + h_r).  Both sides are
        computed from independent pieces of the stored data.
        """
        lhs = self.dRbar
        rhs = (2 * self.dRic00 - 2 * self.H * self.Ric00
               + 2 * sum(a * b for a, b in zip(self.L, self.RbarRic)))
        return lhs - rhs


def sphere_volume(n):
    return 2 * math.pi ** ((n + 1) / 2) / math.gamma((n + 1) / 2)


@dataclass(frozen=True)
class Mode:
    """Boundary mode: Fourier index k (slab) or harmonic degree l (ball)."""

    k: tuple = ()
    l: int = 0
    parity: str = "even"

    @property
    def trivial(self):
        return all(x == 0 for x in self.k) and self.l == 0

    def label(self):
        if self.k:
            return "k=(" + ",".join(map(str, self.k)) + f"),{self.parity}"
        return f"l={self.l}"


@dataclass(frozen=True)
class ModelGeometry:
    kind: str
    n: int
    profiles: tuple
    symmetric: bool = False
    length: object = Fraction(1)
    basis: str = "poly"
    jets_override: tuple | None = field(default=None, compare=False)

    # domain
    @property
    def r_max(self):
        """Right end of the computational interval in r."""
        if self.kind == "TorusSlab":
            return float(self.length) / 2
        return float(self.length)

    @property
    def exact(self):
        if self.jets_override is not None:
            return all(j.exact for j in self.jets_override)
        return all(p.exact for p in self.profiles) and isinstance(
            self.length, (int, Fraction))

    @property
    def components(self):
        return 2 if self.kind == "TorusSlab" else 1

    def psi(self, r, d=0):
        """d-th r-derivative of the fibre scales, array of shape (n, len(r))."""
        r = np.atleast_1d(_arr(r))
        if self.kind == "TorusSlab":
            return np.array([p(r, d) for p in self.profiles])
        v = self.profiles[0](float(self.length) - r, d) * (-1) ** d
        return np.tile(v, (self.n, 1))

    def boundary_area(self):
        """Area of one boundary component for k = h_0."""
        p0 = self.psi(0.0)[:, 0]
        if self.kind == "TorusSlab":
            return float(np.prod(p0))
        return float(p0[0] ** self.n * sphere_volume(self.n))

    def total_area(self):
        return self.components * self.boundary_area()

    def lam(self, r, mode):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        ps = self.psi(r)
        if self.kind == "TorusSlab":
            k = tuple(mode.k) if mode.k else (0,) * self.n
            return sum((2 * math.pi * ki / ps[i]) ** 2 for i, ki in enumerate(k))
        return mode.l * (mode.l + self.n - 1) / ps[0] ** 2

    def lam0(self, mode):
        return float(self.lam(np.array([0.0]), mode)[0])

    # radial curvature (numeric)
    def radial(self, r, third=False):
        """Radial scalars P, K_0i, Rbar, Ric00, J/J0 at points r (complex allowed)."""
        r = np.atleast_1d(_arr(r))
        ps = [self.psi(r, d) for d in range(4 if third else 3)]
        return _curvature(self.kind, self.n, ps)

    def jacobian_ratio(self, r):
        ps = self.psi(r)
        p0 = self.psi(0.0)
        return np.prod(ps / p0, axis=0)

    # formal data
    def psi_series(self, order):
        """Taylor series of each psi_i in r at the boundary, truncated at r^order."""
        if self.jets_override is not None:
            return [s.truncate(order) for s in self.jets_override]
        out = []
        if self.kind == "TorusSlab":
            for p in self.profiles:
                cs, ex = p.taylor(0, order)
                out.append(PolyLogSeries.from_coeffs(cs, order=order, exact=ex))
            return out
        p = self.profiles[0]
        L = self.length
        cs, ex = p.taylor(L, order)
        cs = [c * (-1) ** k for k, c in enumerate(cs)]
        s = PolyLogSeries.from_coeffs(cs, order=order, exact=ex)
        return [s] * self.n

    def to_spec(self):
        d = {"kind": self.kind, "n": self.n, "basis": self.basis,
             "profiles": [p.to_list() for p in self.profiles], "symmetric": self.symmetric}
        d["width" if self.kind == "TorusSlab" else "radius"] = (
            str(self.length) if isinstance(self.length, Fraction) else float(self.length))
        return d


def _curvature(kind, n, ps):
    """Sectional-curvature bookkeeping shared by numeric arrays and series.

    ``ps`` is [psi, psi', psi''(, psi''')], each a sequence over fibres.
    """
    psi, d1, d2 = ps[0], ps[1], ps[2]
    k0 = [-d2[i] / psi[i] for i in range(n)]
    P = sum(d1[i] / psi[i] for i in range(n))
    if kind == "TorusSlab":
        kij = [[(-d1[i] * d1[j] / (psi[i] * psi[j]) if i != j else 0 * psi[i]) for j in range(n)]
               for i in range(n)]
    else:
        kf = (1 - d1[0] * d1[0]) / (psi[0] * psi[0])
        kij = [[(kf if i != j else 0 * psi[i]) for j in range(n)] for i in range(n)]
    ric00 = sum(k0)
    ricii = [k0[i] + sum(kij[i][j] for j in range(n) if j != i) for i in range(n)]
    rbar = 2 * ric00 + sum(kij[i][j] for i in range(n) for j in range(n) if i != j)
    out = {"P": P, "K0": k0, "Kij": kij, "Ric00": ric00, "Ricii": ricii, "Rbar": rbar}
    if len(ps) > 3:
        d3 = ps[3]
        # derivatives of the sectional curvatures
        dk0 = [-(d3[i] * psi[i] - d2[i] * d1[i]) / (psi[i] * psi[i]) for i in range(n)]
        if kind == "TorusSlab":
            dkij = [[0 * psi[i] if i == j else
                     -((d2[i] * d1[j] + d1[i] * d2[j]) * psi[i] * psi[j]
                       - d1[i] * d1[j] * (d1[i] * psi[j] + psi[i] * d1[j]))
                     / (psi[i] * psi[j]) ** 2 for j in range(n)] for i in range(n)]
        else:
            num = 1 - d1[0] * d1[0]
            dkf = (-2 * d1[0] * d2[0] * psi[0] * psi[0] - num * 2 * psi[0] * d1[0]) / psi[0] ** 4
            dkij = [[(dkf if i != j else 0 * psi[i]) for j in range(n)] for i in range(n)]
        out["dRic00"] = sum(dk0)
        out["dRbar"] = 2 * sum(dk0) + sum(dkij[i][j] for i in range(n) for j in range(n) if i != j)
    return out


def boundary_invariants(g: ModelGeometry) -> BoundaryInvariants:
    n = g.n
    ser = g.psi_series(4)
    # psi^{(d)}(0) = d! * coefficient; third jets only if the data carry them
    depth = 4 if all(s.order >= 3 for s in ser) else 3
    jets = [[s.coeff(d) * math.factorial(d) for d in range(depth)] for s in ser]
    ps = [[jets[i][d] for i in range(n)] for d in range(depth)]
    c = _curvature(g.kind, n, ps)
    L = tuple(-ps[1][i] / ps[0][i] for i in range(n))
    H = sum(L)
    Lo = tuple(li - H / n for li in L)
    if g.kind == "TorusSlab":
        R = 0 * H
        Ric = tuple(0 * H for _ in range(n))
    else:
        R = Fraction(n * (n - 1)) / ps[0][0] ** 2 if isinstance(ps[0][0], Fraction) else n * (n - 1) / ps[0][0] ** 2
        Ric = tuple(R / n for _ in range(n))
    return BoundaryInvariants(
        n=n, H=H, L=L, Lo=Lo, LoNormSq=sum(x * x for x in Lo), Lo3=sum(x ** 3 for x in Lo),
        R=R, Ric=Ric, Rbar=c["Rbar"], RbarRic=tuple(c["Ricii"]), RbarNormal=tuple(c["K0"]),
        Ric00=c["Ric00"], dRbar=c.get("dRbar"), dRic00=c.get("dRic00"), exact=g.exact)


def make_geometry(spec) -> ModelGeometry:
    """Build and validate a geometry from a spec dict (or JSON path)."""
    if isinstance(spec, str):
        with open(spec) as fh:
            spec = json.load(fh)
    kind = spec["kind"]
    n = int(spec["n"])
    basis = spec.get("basis", "poly")
    if kind not in ("TorusSlab", "WarpedBall"):
        raise GeometryError(f"unknown kind {kind!r}")
    profs = tuple(make_profile(c, basis) for c in spec["profiles"])
    if kind == "TorusSlab":
        if len(profs) != n:
            raise GeometryError("TorusSlab needs one profile per boundary direction")
        length = _num(spec.get("width", 1))
    else:
        if len(profs) != 1:
            raise GeometryError("WarpedBall takes a single warping profile")
        length = _num(spec.get("radius", 1))
    g = ModelGeometry(kind, n, profs, bool(spec.get("symmetric", False)), length, basis)
    validate(g)
    return g


def validate(g: ModelGeometry):
    w = float(g.length)
    if g.kind == "TorusSlab":
        xs = np.linspace(0.0, w if g.symmetric else w / 2, 401)
        vals = np.array([p(xs) for p in g.profiles])
        if np.any(vals <= 0):
            raise GeometryError("degenerate metric")
        if g.symmetric:
            xs2 = np.linspace(0.0, w, 37)
            for p in g.profiles:
                if np.max(np.abs(p(w - xs2) - p(xs2))) > 1e-14 * max(1.0, np.max(np.abs(p(xs2)))):
                    raise GeometryError("asymmetric profile with symmetric flag")
    else:
        p = g.profiles[0]
        xs = np.linspace(0.0, w, 401)[1:]
        if np.any(p(xs) <= 0):
            raise GeometryError("degenerate metric")
        z = np.array([0.0])
        if abs(p(z)[0]) > 1e-12 or abs(p(z, 1)[0] - 1) > 1e-12 or abs(p(z, 2)[0]) > 1e-12:
            raise GeometryError("singular center")
    return g


# conformal rescaling e^{2 omega} gbar with omega radial

def conformal_rescale(g: ModelGeometry, omega, N=96):
    """Geometry of e^{2 omega} gbar, re-parametrized by the new distance.

    ``omega`` is a number (constant factor) or a profile in the native
    variable (PolyProfile/TrigProfile).  Returns (geometry, invariants).
    """
    if isinstance(omega, (int, float, Fraction)):
        c = float(omega)
        if c == 0:
            return g, boundary_invariants(g)
        ec = math.exp(c)
        profs = tuple(_scaled(p, ec) for p in g.profiles)
        g2 = replace(g, profiles=profs, length=float(g.length) * ec, jets_override=None)
        return g2, boundary_invariants(g2)
    return _rescale_radial(g, omega, N)


def _scaled(p, ec):
    """x -> ec * p(x / ec)."""
    if isinstance(p, PolyProfile):
        return PolyProfile([float(a) * ec * ec ** (-k) for k, a in enumerate(p.coeffs)])
    if isinstance(p, TrigProfile):
        t = TrigProfile([a * ec for a in p.coeffs], freq=p.freq / ec)
        return t
    raise GeometryError("constant rescale of a numeric profile is not supported")


def _rescale_radial(g, omega, N):
    n = g.n
    L = float(g.length)
    if g.kind == "WarpedBall" and abs(float(omega(np.array([0.0]), 1)[0])) > 1e-12:
        raise GeometryError("singular center: omega must be even about the center")
    if g.kind == "TorusSlab":
        # the slab is the mirror double of [0, w/2]; omega must respect that
        xs = np.linspace(0.0, L, 41)
        if np.max(np.abs(omega(L - xs) - omega(xs))) > 1e-12 * max(1.0, np.max(np.abs(omega(xs)))):
            raise GeometryError("omega must be symmetric about the slab mid-plane")
    # new native variable xt(x) = int_0^x e^omega; profiles e^omega phi
    xs = cheb.nodes(N, 0.0, L)
    e = cheb.interpolant(np.exp(omega(xs)), 0.0, L)
    X = e.integ(lbnd=0.0)
    Lt = float(X(L))
    if not np.all(np.diff(X(xs)) > 0):
        raise GeometryError("collar too small")
    xt_nodes = cheb.nodes(N, 0.0, Lt)
    # invert xt(x) by Newton from a linear guess
    x = xt_nodes * (L / Lt)
    for _ in range(50):
        dx = (X(x) - xt_nodes) / e(x)
        x = np.clip(x - dx, 0.0, L)
        if np.max(np.abs(dx)) < 1e-15:
            break
    ew = np.exp(omega(x))
    new = []
    for p in g.profiles:
        new.append(ChebProfile(cheb.interpolant(ew * p(x), 0.0, Lt)))
    # boundary jets by exact series composition in the distance variable
    K = 3 * (n + 1) + 1
    om_cs, _ = omega.taylor(0.0 if g.kind == "TorusSlab" else L, K)
    if g.kind == "WarpedBall":
        om_cs = [c * (-1) ** k for k, c in enumerate(om_cs)]
    om = PolyLogSeries.from_coeffs([float(c) for c in om_cs], order=K, exact=False)
    jets = rescaled_jets(g, om)
    g2 = replace(g, profiles=tuple(new), length=Lt, basis="cheb", jets_override=tuple(jets))
    return g2, boundary_invariants(g2)


def rescaled_jets(g: ModelGeometry, om):
    """Boundary series of the profiles of e^{2 omega} gbar in its own distance.

    ``om`` is the series of omega in r (valuation >= 0); the result has the
    truncation order of ``om``.  With r_t = int_0^r e^omega the new profiles
    are e^omega psi_i composed with the inverse of r_t.
    """
    K = om.order
    eom = om.exp(K)
    rt = eom.integrate()
    inv = rt.revert()
    jets = []
    for s in g.psi_series(K):
        if not om.exact:
            s = s.to_float()
        jets.append((s * eom).compose(inv).truncate(K))
    if g.kind == "WarpedBall":
        jets = [jets[0]] * g.n
    return jets


def lemma52_predict(inv: BoundaryInvariants, w0, wr, wrr):
    """Predicted invariants of e^{2 omega} gbar from the conformal change laws.

    Radial omega: tangential derivatives vanish, nabla-bar^2_{mu nu} omega =
    -w_r L_{mu nu} and Delta-bar omega = w_rr - H w_r at M.  Mixed indices.
    """
    n = inv.n
    e = math.exp(w0)
    lap = wrr - inv.H * wr
    Ht = (inv.H - n * wr) / e
    Lo = tuple(x / e for x in inv.Lo)
    rbar = (inv.Rbar - 2 * n * lap - n * (n - 1) * wr * wr) / e ** 2
    # ambient Ricci, tangential block (standard law in dimension n+1)
    ric = tuple((inv.RbarRic[i] + (n - 1) * wr * inv.L[i] - (lap + (n - 1) * wr * wr)) / e ** 2
                for i in range(n))
    R = inv.R / e ** 2
    return {"H": Ht, "Lo": Lo, "LoNormSq": inv.LoNormSq / e ** 2, "Rbar": rbar,
            "RbarRic": ric, "R": R}


# Fermi-coordinate expansion check

def _christoffel_normal_curvature(G):
    """R_{0ii0} and its covariant r-derivative for dr^2 + sum G_i dx_i^2.

    ``G`` holds (G, G', G'', G''') per direction at one point.  Computed from
    Christoffel symbols Gamma^0_ii = -G'/2, Gamma^i_0i = G'/(2G).
    """
    out = []
    for g0, g1, g2, g3 in G:
        r0 = -0.5 * g2 + g1 * g1 / (4 * g0)
        dr0 = -0.5 * g3 + (2 * g1 * g2 * g0 - g1 ** 3) / (4 * g0 * g0)
        cov = dr0 - 2 * (g1 / (2 * g0)) * r0
        out.append((r0, cov))
    return out


def fermi_check(g: ModelGeometry, order=3):
    """Residuals between Taylor coefficients of h_r and the Fermi expansion."""
    n = g.n
    ser = g.psi_series(order + 1)
    res = {}
    for i in range(n):
        h = ser[i] * ser[i]
        G = [h.coeff(d) * math.factorial(d) for d in range(4)]
        (r0, cov), = _christoffel_normal_curvature([G])
        k = G[0]
        Lmix = -G[1] / (2 * k)          # L^i_i, from L_ii = -h'_ii/2
        Lcov = Lmix * k
        pred = {1: -2 * Lcov, 2: Lmix * Lcov - r0,
                3: -(cov - 4 * Lmix * r0) / 3}
        for m in range(1, order + 1):
            d = h.coeff(m) - pred[m]
            res.setdefault(m, []).append(d)
    return {m: max(abs(float(x)) for x in v) for m, v in res.items()}
