"""Geodesic gauge rhat = u e^omega of the singular Yamabe metric on a model collar.

With everything radial the gauge equation 2<du, dw> + u|dw|^2 = (1 - |du|^2)/u
factors as (u w' + u')^2 = 1, so on the branch with rhat increasing

    w' = (1 - u') / u,   w(0) = 0.

Then rhat' = e^w, i.e. rhat is the arclength of e^{2w} gbar and the
compactification e^{2w} gbar is again a warped model in the variable rhat.
Its boundary data come from composing the profile jets with the jets of w.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .model import BoundaryInvariants, ModelGeometry, boundary_invariants, rescaled_jets
from .series import PolyLogSeries
from .yamabe import SYSolution, _graded_panels


class GaugeError(RuntimeError):
    pass


def omega_prime(sol: SYSolution, r):
    """(1 - u')/u from the numeric solution (r > 0)."""
    r = np.asarray(r, dtype=float)
    ut, dut = sol.ut(r), sol.ut(r, 1)
    return (1.0 - ut - r * dut) / (r * ut)


def omega_formal(sol: SYSolution) -> PolyLogSeries:
    """Series of omega through r^n, the last order fixed by local data.

    omega' = -((ut - 1)/r + ut')/ut, and ut is local through r^n.
    """
    n = sol.n
    ut = sol.formal.truncate(n)
    num = (ut - 1).shift(-1) + ut.derivative()
    wp = -(num / ut)
    return wp.truncate(n - 1).integrate()


def lemma_jets(inv: BoundaryInvariants):
    """Closed-form omega jets at M for radial models (tangential derivatives vanish).

    The third jet uses (n - 2) in the last denominator; with (n - 20) it
    disagrees with the series route.
    """
    n = inv.n
    H, Rb, R, Lo2 = inv.H, inv.Rbar, inv.R, inv.LoNormSq
    fr = Fraction if inv.exact else (lambda a, b=1: a / b)
    w1 = H * fr(1, n)
    w2 = (fr(1 + n, 2 * n * n) * H * H + fr(1, 2 * n) * Rb
          - fr(1, 2 * (n - 1)) * R + fr(1, 2 * (n - 1)) * Lo2)
    out = {"omega_r": w1, "omega_rr": w2}
    if n >= 3:
        LoRicb = sum(a * b for a, b in zip(inv.Lo, inv.RbarRic))
        LoRic = sum(a * b for a, b in zip(inv.Lo, inv.Ric))
        out["omega_rrr"] = (fr(1, n - 2) * LoRicb - fr(2, n - 2) * LoRic + fr(1, 2 * n) * inv.dRbar
                            + fr(n * n + 2 * n + 1, 2 * n ** 3) * H ** 3
                            + fr(n + 1, 2 * n * n) * H * Rb
                            - fr(n + 2, 2 * n * (n - 1)) * H * R
                            + fr(3 * n * n - 4 * n - 2, 2 * n * (n - 1) * (n - 2)) * H * Lo2)
    return out


def local_jets(f, r_hi, degree, log_from=None, extra=6, m=100, r_lo_frac=1e-2):
    """Taylor coefficients c_0..c_degree of f near 0 by a polylog least-squares fit.

    Columns x^k (k <= degree + extra) and, from ``log_from`` on, x^k log x,
    with x = r / r_hi; samples at Chebyshev points of [r_lo_frac r_hi, r_hi].
    """
    x = 0.5 * (1 + r_lo_frac) + 0.5 * (1 - r_lo_frac) * np.cos(np.pi * (np.arange(m) + 0.5) / m)
    y = f(x * r_hi)
    cols, keys = [], []
    for k in range(degree + extra + 1):
        cols.append(x ** k)
        keys.append((k, 0))
        if log_from is not None and k >= log_from:
            cols.append(x ** k * np.log(x))
            keys.append((k, 1))
    A = np.stack(cols, axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    sv = np.linalg.svd(A, compute_uv=False)
    taylor = [coef[keys.index((k, 0))] / r_hi ** k for k in range(degree + 1)]
    return taylor, float(sv[0] / sv[-1])


def numeric_ut_jets(sol: SYSolution, r_hi=None):
    """ut_r, ut_rr (ut_rrr for n >= 3) at 0 fitted from the global grid solution.

    The first log term Lcal r^{n+1} log r is local data and is removed before
    fitting; the remaining log columns start one order later.
    """
    n = sol.n
    r_hi = 0.1 * sol.geometry.r_max if r_hi is None else r_hi
    L = float(sol.Lcal)
    deg = 3 if n >= 3 else 2
    tay, _ = local_jets(lambda r: sol.ut(r) - L * r ** (n + 1) * np.log(r), r_hi, deg,
                        n + 2 if L != 0.0 else None)
    out = {"ut_r": tay[1], "ut_rr": 2 * tay[2]}
    if n >= 3:
        out["ut_rrr"] = 6 * tay[3]
    return out


def gauge_rhs_root(r, ut, dut):
    """omega' from  r w'^2 + (2 + 2 r ut'/ut) w' = (1 - (ut + r ut')^2)/(r ut^2).

    The increasing-rhat root, in the cancellation-free form 2c/(b + sqrt(b^2 + 4 r c)).
    """
    b = 2 + 2 * r * dut / ut
    du = ut + r * dut
    c = (1 - du) * (1 + du) / (r * ut * ut)
    return 2 * c / (b + np.sqrt(b * b + 4 * r * c))


def cauchy_jets(f, rho, degree, m=64):
    """Taylor coefficients of an analytic f at 0 from samples on |z| = rho (trapezoid rule)."""
    th = 2 * np.pi * np.arange(m) / m
    z = rho * np.exp(1j * th)
    c = np.fft.fft(f(z)) / m
    return [complex(c[k]).real / rho ** k for k in range(degree + 1)]


def ode_omega_jets(sol: SYSolution, rho=None):
    """omega jets from the gauge ODE solved numerically on the local part of ut.

    ut is replaced by its expansion through r^n, which fixes omega through
    r^n.  The quadratic gauge equation is then analytic near r = 0; it is
    solved pointwise on a small complex circle and the jets are the Cauchy
    coefficients.
    """
    n = sol.n
    rho = 0.05 * sol.geometry.r_max if rho is None else rho
    loc = sol.formal.truncate(n)
    cs = [float(loc.coeff(k)) for k in range(n + 1)]
    p = np.polynomial.Polynomial(cs)
    dp = p.deriv()
    tay = cauchy_jets(lambda z: gauge_rhs_root(z, p(z), dp(z)), rho, n - 1)
    names = ["omega_r", "omega_rr", "omega_rrr"]
    return {names[k]: tay[k] * math.factorial(k) for k in range(min(n, 3))}, rho


def grid_omega_jets(sol: SYSolution, r_hi=None):
    """omega jets fitted from the global grid solution (diagnostic; limited by
    the absolute accuracy of ut near the boundary)."""
    n = sol.n
    r_hi = 0.1 * sol.geometry.r_max if r_hi is None else r_hi
    logs = n if float(sol.Lcal) != 0.0 else None
    tay, _ = local_jets(lambda r: omega_prime(sol, r), r_hi, n - 1, logs)
    names = ["omega_r", "omega_rr", "omega_rrr"]
    return {names[k]: tay[k] * math.factorial(k) for k in range(min(n, 3))}


@dataclass
class GeodesicGauge:
    geometry: ModelGeometry
    solution: SYSolution
    jets: dict  # gauge ODE solved numerically on the local expansion
    formal_jets: dict
    closed_jets: dict
    hat: dict  # route -> BoundaryInvariants of e^{2 omega} gbar
    fit_cond: float = 0.0
    grid_jets: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def n(self):
        return self.geometry.n

    def omega(self, r):
        """omega(r) = int_0^r (1 - u')/u by graded Gauss quadrature."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.empty_like(r)
        for i, x in enumerate(r):
            if x <= 0:
                out[i] = 0.0
                continue
            xq, wq = _graded_panels(x * 1e-6, x, per=20)
            head = x * 1e-6 * float(self.jets["omega_r"])
            out[i] = head + float(np.sum(wq * omega_prime(self.solution, xq)))
        return out

    def rhat(self, r):
        r = np.asarray(r, dtype=float)
        return r * self.solution.ut(r) * np.exp(self.omega(r))

    def hhat(self, r):
        """Warping factors psi_i e^omega of the normal-form metric, at native r."""
        return self.geometry.psi(r) * np.exp(self.omega(r))

    def unit_gradient_residual(self, m=40):
        """sup |rhat(r) - int_0^r e^omega| on the collar: |d rhat| = 1 for e^{2 omega} gbar."""
        c = self.geometry.r_max
        rs = np.linspace(0.05, 0.9, m) * c
        worst = 0.0
        for x in rs:
            xq, wq = _graded_panels(x * 1e-6, x, per=20)
            integ = x * 1e-6 + float(np.sum(wq * np.exp(self.omega(xq))))
            worst = max(worst, abs(integ - float(self.rhat(x)[0])))
        return worst

    def summary(self):
        return {
            "omega_jets_numeric": {k: float(v) for k, v in self.jets.items()},
            "omega_jets_formal": {k: str(v) for k, v in self.formal_jets.items()},
            "omega_jets_closed_form": {k: str(v) for k, v in self.closed_jets.items()},
            "hat": {k: v.as_dict() for k, v in self.hat.items()},
            "omega_jets_grid": {k: float(v) for k, v in self.grid_jets.items()},
            "fit_cond": self.fit_cond,
            "notes": self.notes,
        }


def _hat_invariants(g: ModelGeometry, coeffs, exact):
    """Invariants of e^{2 omega} gbar from omega's Taylor coefficients (order len-1)."""
    om = PolyLogSeries.from_coeffs(coeffs, order=len(coeffs) - 1, exact=exact)
    jets = rescaled_jets(g, om)
    return boundary_invariants(replace(g, jets_override=tuple(jets)))


def hat_geometry(sol: SYSolution) -> ModelGeometry:
    """Boundary jets (through r^n) of e^{2 omega} gbar in its own distance, as a model."""
    g = sol.geometry
    jets = rescaled_jets(g, omega_formal(sol))
    return replace(g, jets_override=tuple(jets))


def geodesic_gauge(sol: SYSolution, g: ModelGeometry | None = None) -> GeodesicGauge:
    g = sol.geometry if g is None else g
    n = g.n
    c = g.r_max
    probe = np.linspace(0.02, 1.0, 50) * c
    if not np.all(np.isfinite(omega_prime(sol, probe))) or np.any(sol.ut(probe) <= 0):
        raise GaugeError("collar exhausted")
    inv = boundary_invariants(g)
    names = ["omega_r", "omega_rr", "omega_rrr"]
    jets, cond = ode_omega_jets(sol)
    wf = omega_formal(sol)
    fj = {names[k - 1]: wf.coeff(k) * math.factorial(k) for k in range(1, min(n, 3) + 1)}
    cj = lemma_jets(inv)
    hat = {}
    zero = Fraction(0) if wf.exact else 0.0
    hat["formal"] = _hat_invariants(g, [zero] + [wf.coeff(k) for k in range(1, n + 1)], wf.exact)
    hat["numeric"] = _hat_invariants(
        g, [0.0] + [float(jets[names[k]]) / math.factorial(k + 1) for k in range(len(jets))], False)
    ck = [cj[names[k]] / math.factorial(k + 1) for k in range(len(cj))]
    hat["closed_form"] = _hat_invariants(g, [zero if inv.exact else 0.0] + ck, inv.exact)
    gauge = GeodesicGauge(geometry=g, solution=sol, jets=jets, formal_jets=fj, closed_jets=cj,
                          hat=hat, fit_cond=cond, grid_jets=grid_omega_jets(sol))
    if n < 3:
        gauge.notes.append("third omega jet and d Rbar-hat not defined for n = 2 (log term at r^3)")
    return gauge


def normal_form_check(gauge: GeodesicGauge) -> dict:
    """Residuals of Hhat = 0, the Rbar-hat relation and (n >= 3) its normal derivative."""
    n = gauge.n
    base = boundary_invariants(gauge.geometry)
    report = {}
    for route, h in gauge.hat.items():
        rows = {"H_hat": float(h.H)}
        target = Fraction(n, n - 1) * (base.R - base.LoNormSq) if h.exact else n / (n - 1) * (
            float(base.R) - float(base.LoNormSq))
        rows["Rbar_hat"] = float(h.Rbar - target)
        if n >= 3:
            LoRic = sum(a * b for a, b in zip(base.Lo, base.Ric))
            LoRicHat = sum(a * b for a, b in zip(h.Lo, h.RbarRic))
            pred = 4 * n / (n - 2) * float(LoRic) - 2 * n / (n - 2) * float(LoRicHat)
            rows["dRbar_hat"] = float(h.dRbar) - pred
        report[route] = rows
    jets = {}
    for k, v in gauge.jets.items():
        jets[k] = {"numeric_vs_formal": float(v) - float(gauge.formal_jets[k]),
                   "grid_vs_formal": float(gauge.grid_jets[k]) - float(gauge.formal_jets[k]),
                   "closed_vs_formal": float(gauge.closed_jets[k]) - float(gauge.formal_jets[k])}
    report["jets"] = jets
    report["max_residual"] = max(abs(v) for r in report.values() if r is not jets
                                 for v in r.values() if isinstance(v, float))
    report["max_jet_error"] = max(max(abs(d["numeric_vs_formal"]), abs(d["closed_vs_formal"]))
                                  for d in jets.values())
    return report
