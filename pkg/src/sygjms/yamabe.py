"""Singular Yamabe defining function u = r * ut on model geometries.

For radial u the equation  n(n+1)(1 - |du|^2) + 2n u Lap u + u^2 Rbar = 0
(scalar curvature -n(n+1) for u^{-2} gbar) becomes the ODE

    n(n+1)(1 - u'^2) + 2n u (u'' + P u') + u^2 Rbar = 0,   P = sum psi_i'/psi_i.

The formal solution is built order by order in exact series arithmetic; the
global solution by Chebyshev collocation and Newton's method.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from numpy.polynomial.legendre import leggauss

from . import cheb
from .model import ModelGeometry, _curvature
from .series import PolyLogSeries


class YamabeError(RuntimeError):
    pass


# formal expansion

def background_series(g: ModelGeometry, order):
    """Series of P(r) and Rbar(r) at the boundary, valid through r^order."""
    ps = g.psi_series(order + 2)
    d1 = [s.derivative() for s in ps]
    d2 = [s.derivative() for s in d1]
    c = _curvature(g.kind, g.n, [ps, d1, d2])
    return c["P"].truncate(order), c["Rbar"].truncate(order)


def yamabe_defect(ut, P, Rbar, n):
    """E(u) as a series for u = r * ut."""
    u = ut.shift(1)
    du = u.derivative()
    ddu = du.derivative()
    return n * (n + 1) * (1 - du * du) + 2 * n * u * (ddu + P * du) + u * u * Rbar


def formal_ut(g: ModelGeometry, order=None):
    """ut = 1 + sum_{k<=n} a_k r^k + Lcal r^{n+1} log r.

    ``order`` counts powers of u (as in the usual statement up to r^{n+2});
    requesting more than n + 2 is refused.
    """
    n = g.n
    order = n + 2 if order is None else order
    if order > n + 2:
        raise YamabeError("beyond first log order")
    K = order - 1  # highest power of r kept in ut
    exact = g.exact
    P, Rbar = background_series(g, K + 1)
    one = Fraction(1) if exact else 1.0
    coeffs = {(0, 0): one}
    for k in range(1, min(K, n) + 1):
        ut = PolyLogSeries(coeffs, 0, k, exact)
        Ek = yamabe_defect(ut, P, Rbar, n).coeff(k)
        coeffs[(k, 0)] = -Ek / (2 * n * (k + 1) * (k - n - 1))
    Lcal = 0 * one
    if K >= n + 1:
        ut = PolyLogSeries(coeffs, 0, n + 1, exact)
        E = yamabe_defect(ut, P, Rbar, n)
        Lcal = -E.coeff(n + 1) / (2 * n * (n + 2))
        coeffs[(n + 1, 1)] = Lcal
        # the plain r^{n+1} coefficient is global data: the series stops at the log term
        return PolyLogSeries(coeffs, 0, n + 1, exact).truncate(n + 1), Lcal, False
    return PolyLogSeries(coeffs, 0, K, exact), Lcal, True


@dataclass
class SYSolution:
    geometry: ModelGeometry
    formal: PolyLogSeries
    Lcal: object
    r: np.ndarray = None
    values: np.ndarray = None
    interp: object = None
    residual_norm: float = float("nan")
    N: int = 0
    history: list = field(default_factory=list)
    u_next: float = float("nan")
    overlap_C: float = float("nan")

    @property
    def n(self):
        return self.geometry.n

    def ut(self, r, d=0):
        return self.interp(r, d)

    def u(self, r, d=0):
        r = np.asarray(r, dtype=float)
        if d == 0:
            return r * self.ut(r)
        return r * self.ut(r, d) + d * self.ut(r, d - 1)

    def formal_coeff(self, k, j=0):
        return self.formal.coeff(k, j)

    def summary(self):
        f = self.formal
        return {
            "n": self.n,
            "ut_coeffs": {f"{k},{j}": float(c) for (k, j), c in sorted(f.terms.items())},
            "Lcal": float(self.Lcal),
            "u_next_fit": self.u_next,
            "residual_norm": self.residual_norm,
            "N": self.N,
            "overlap_C": self.overlap_C,
            "newton_history": self.history,
        }


def sy_formal_expansion(g: ModelGeometry, order=None) -> SYSolution:
    ut, L, _ = formal_ut(g, order)
    return SYSolution(geometry=g, formal=ut, Lcal=L)


def contour_ut_jets(g: ModelGeometry, rho=None, m=64, maxit=30):
    """Local numeric route to u_1..u_n (ut = 1 + sum u_k r^k + ...).

    The polynomial 1 + a_1 r + ... + a_n r^n is fixed by requiring that the
    Cauchy coefficients of the defect E on |r| = rho vanish through order n.
    Geometry enters only through complex evaluations of the profiles; the
    nonlinear system is solved by Newton with the analytic Jacobian.
    """
    n = g.n
    rho = 0.05 * g.r_max if rho is None else rho
    th = 2 * np.pi * np.arange(m) / m
    z = rho * np.exp(1j * th)
    rad = g.radial(z)
    P, Rb = rad["P"], rad["Rbar"]
    a = np.zeros(n)

    def coeffs(f):
        c = np.fft.fft(f) / m
        return np.array([c[k] / rho ** k for k in range(1, n + 1)])

    for _ in range(maxit):
        ut = 1 + sum(a[k - 1] * z ** k for k in range(1, n + 1))
        dut = sum(k * a[k - 1] * z ** (k - 1) for k in range(1, n + 1))
        ddut = sum(k * (k - 1) * a[k - 1] * z ** (k - 2) for k in range(2, n + 1)) + 0 * z
        u, du, ddu = z * ut, ut + z * dut, 2 * dut + z * ddut
        E = n * (n + 1) * (1 - du * du) + 2 * n * u * (ddu + P * du) + u * u * Rb
        F = coeffs(E)
        J = np.empty((n, n), dtype=complex)
        for k in range(1, n + 1):
            dU, dDU, dDDU = z ** (k + 1), (k + 1) * z ** k, (k + 1) * k * z ** (k - 1)
            dE = (-2 * n * (n + 1) * du * dDU + 2 * n * dU * (ddu + P * du)
                  + 2 * n * u * (dDDU + P * dDU) + 2 * u * Rb * dU)
            J[:, k - 1] = coeffs(dE)
        step = np.linalg.solve(J.real, F.real)
        a = a - step
        if np.max(np.abs(step)) < 1e-15 * max(1.0, np.max(np.abs(a))):
            break
    return {"ut_r": a[0], "ut_rr": 2 * a[1] if n >= 2 else 0.0,
            **({"ut_rrr": 6 * a[2]} if n >= 3 else {}), "coefficients": a.tolist()}


# global collocation solve

def _residual(g, r, ut, dut, ddut, rad):
    """(E/r, dE/d(ut) pieces) at interior points."""
    n = g.n
    u = r * ut
    du = ut + r * dut
    ddu = 2 * dut + r * ddut
    P, Rb = rad["P"], rad["Rbar"]
    E = n * (n + 1) * (1 - du * du) + 2 * n * u * (ddu + P * du) + u * u * Rb
    return E / r, (u, du, ddu, P, Rb)


def _newton(g, N, maxit):
    n = g.n
    c = g.r_max
    grid = cheb.RadialGrid(N, c)
    r = grid.r
    D1, D2 = grid.Dr, grid.Drr
    ri = r[1:-1]
    rad = g.radial(ri)
    I = np.eye(N + 1)
    col = lambda v: v[:, None]

    def resid(ut):
        dut, ddut = D1 @ ut, D2 @ ut
        F = np.empty(N + 1)
        F[0] = ut[0] - 1.0
        Er, aux = _residual(g, ri, ut[1:-1], dut[1:-1], ddut[1:-1], rad)
        F[1:-1] = Er
        F[-1] = ut[-1] + c * dut[-1]
        return F, aux

    ut = 1.0 - r / (2.0 * c)
    F, aux = resid(ut)
    fn = float(np.max(np.abs(F)))
    hist = [{"iter": 0, "residual": fn, "damping": 0.0, "step": 0.0}]
    for it in range(1, maxit + 1):
        u, du, ddu, P, Rb = aux
        J = np.zeros((N + 1, N + 1))
        J[0, 0] = 1.0
        dU = np.diag(r)[1:-1]
        dDU = (I + np.diag(r) @ D1)[1:-1]
        dDDU = (2 * D1 + np.diag(r) @ D2)[1:-1]
        Ji = (n * (n + 1) * (-2 * col(du)) * dDU
              + 2 * n * col(ddu + P * du) * dU
              + 2 * n * col(u) * (dDDU + col(P) * dDU)
              + 2 * col(u * Rb) * dU)
        J[1:-1] = Ji / col(ri)
        J[-1] = I[-1] + c * D1[-1]
        step = np.linalg.solve(J, -F)
        lam = 1.0
        accepted = False
        while lam > 1e-4:
            trial = ut + lam * step
            if np.all(trial > 0):
                Ft, auxt = resid(trial)
                ft = float(np.max(np.abs(Ft)))
                if ft < fn or ft < 1e-300:
                    accepted = True
                    break
            lam /= 2
        sz = float(np.max(np.abs(lam * step)))
        if not accepted:
            # no decrease possible: the residual sits at its rounding floor
            hist.append({"iter": it, "residual": fn, "damping": 0.0, "step": 0.0})
            break
        ut, F, aux, fn = trial, Ft, auxt, ft
        hist.append({"iter": it, "residual": fn, "damping": lam, "step": sz})
        if sz < 1e-15 or fn < 1e-15:
            break
    else:
        raise YamabeError(f"no convergence (damping history {hist})")
    if np.any(ut <= 0):
        raise YamabeError("solution left admissible cone")
    return grid, ut, hist


def sy_global_solve(g: ModelGeometry, tol=1e-9, N=None, maxit=40) -> SYSolution:
    """Newton collocation solve on the mapped grid r = c t^2.

    Grid sizes are tried in increasing order and the first one whose
    Chebyshev tail is resolved and whose node residual meets ``tol`` wins.
    The node residual has a rounding floor that grows like N^4 near the
    singular ends, so the smallest resolved grid is also the most accurate.
    """
    if tol < 1e-12:
        raise YamabeError("tol below the 1e-12 floor")
    sol = sy_formal_expansion(g)
    sizes = [N] if N else [8, 12, 16, 24, 32, 48, 64]
    tried = []
    prev = None
    for m in sizes:
        grid, ut, hist = _newton(g, m, maxit)
        cand = SYSolution(geometry=g, formal=sol.formal, Lcal=sol.Lcal, r=grid.r, values=ut, N=m,
                          history=hist, interp=grid.function(ut))
        if np.any(ut <= 0):
            raise YamabeError("solution left admissible cone")
        cand.residual_norm = node_residual(cand)
        if prev is not None:
            cand.history = hist + [{"previous_N": prev.N, "change": float(
                np.max(np.abs(cand.ut(prev.r) - prev.values)))}]
        prev = cand
        resolved = N is not None or cand.interp.tail() < 1e-15
        tried.append((resolved, cand))
        if resolved and cand.residual_norm <= tol:
            _fit_overlap(cand)
            return cand
    # numeric (interpolated) profiles cap the attainable tail; accept the
    # best-resolved candidate meeting tol if its tail is still small
    ok = [c for _, c in tried if c.residual_norm <= tol and c.interp.tail() < 1e-12]
    if ok:
        cand = min(ok, key=lambda c: c.interp.tail())
        cand.history = cand.history + [{"accepted_tail": float(cand.interp.tail())}]
        _fit_overlap(cand)
        return cand
    pool = [c for ok, c in tried if ok] or [c for _, c in tried]
    best = min(pool, key=lambda c: c.residual_norm)
    raise YamabeError(f"no convergence: residual {best.residual_norm:.3e} above tol {tol:.1e} "
                      f"(damping history {best.history})")


def node_residual(sol: SYSolution):
    """sup |E(u)| at the collocation nodes (E unscaled)."""
    g = sol.geometry
    r = sol.r[1:-1]
    rad = g.radial(r)
    E, _ = _residual(g, r, sol.ut(r), sol.ut(r, 1), sol.ut(r, 2), rad)
    return float(np.max(np.abs(E * r)))


def defect_norm(sol: SYSolution, m=997):
    """sup |E(u)| over off-node interior points."""
    g = sol.geometry
    c = g.r_max
    t = (np.arange(m) + 0.5) / m
    r = c * 0.5 * (1 - np.cos(np.pi * t))
    rad = g.radial(r)
    E, _ = _residual(g, r, sol.ut(r), sol.ut(r, 1), sol.ut(r, 2), rad)
    return float(np.max(np.abs(E * r)))


def _fit_overlap(sol: SYSolution):
    """Global coefficient u_{n+1} of r^{n+1} in ut and the overlap constant C."""
    n = sol.n
    f = sol.formal.to_float()
    c = sol.geometry.r_max
    r = np.geomspace(1e-3 * c, 0.08 * c, 40)
    diff = sol.ut(r) - np.array([f(x) for x in r])
    # diff = u_{n+1} r^{n+1} + r^{n+2}(a log^2 r + b log r + d) + ...
    lr = np.log(r)
    A = np.stack([r ** (n + 1), r ** (n + 2) * lr ** 2, r ** (n + 2) * lr, r ** (n + 2)], axis=1)
    coef, *_ = np.linalg.lstsq(A, diff, rcond=None)
    sol.u_next = float(coef[0])
    sol.overlap_C = float(np.max(np.abs(diff) / r ** (n + 1)))


# volume ledger

@dataclass
class VolumeLedger:
    n: int
    c: list
    E: float
    V: float
    v: list
    area: float
    components: int
    per_component: dict
    fit_diagnostics: dict

    def as_dict(self):
        return {"n": self.n, "c": self.c, "E": self.E, "V": self.V, "v": self.v,
                "area": self.area, "components": self.components,
                "per_component": self.per_component, "fit_diagnostics": self.fit_diagnostics}


def volume_density_series(sol: SYSolution):
    """Series of ut^{-n-1} J/J0, the density of dv_g against r^{-1-n} dr dv_k."""
    g = sol.geometry
    n = g.n
    ps = g.psi_series(n + 1)
    J = None
    for s in ps:
        t = s / s.coeff(0)
        J = t if J is None else J * t
    w = sol.formal.power(-(n + 1)) * J
    return w.truncate(n + 1)


def _graded_panels(a, b, per=24, ratio=2.0):
    """Gauss-Legendre nodes/weights on geometrically graded panels of [a, b]."""
    edges = [a]
    while edges[-1] * ratio < b:
        edges.append(edges[-1] * ratio)
    edges.append(b)
    x0, w0 = leggauss(per)
    xs, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        xs.append(0.5 * (hi - lo) * x0 + 0.5 * (hi + lo))
        ws.append(0.5 * (hi - lo) * w0)
    return np.concatenate(xs), np.concatenate(ws)


def density(sol: SYSolution, r):
    g = sol.geometry
    return sol.ut(r) ** (-(g.n + 1)) * g.jacobian_ratio(r)


def volume_expansion(sol: SYSolution, g: ModelGeometry | None = None, r_a=None) -> VolumeLedger:
    g = sol.geometry if g is None else g
    n = g.n
    c = g.r_max
    ws = volume_density_series(sol)
    v = [ws.coeff(j) for j in range(n + 1)]
    vf = [float(x) for x in v]
    alpha = float(ws.coeff(n + 1, 1))
    A1 = g.boundary_area()
    comps = g.components
    A = A1 * comps
    r_a = 2e-3 * c if r_a is None else r_a

    def w_rem(r):
        return density(sol, r) - sum(vf[j] * r ** j for j in range(n + 1))

    # small-r model: w_rem / r^{n+1} = alpha log r + beta + r (gamma log r + delta) + ...
    # with alpha known exactly; log columns only if the obstruction is nonzero
    rf = np.geomspace(r_a, 0.1 * c, 40)
    lr = np.log(rf)
    y = w_rem(rf) / rf ** (n + 1) - alpha * lr
    logs = float(sol.Lcal) != 0.0
    if logs:
        M = np.stack([np.ones_like(rf), rf * lr, rf, rf ** 2 * lr, rf ** 2], axis=1)
    else:
        M = np.stack([np.ones_like(rf), rf, rf ** 2, rf ** 3], axis=1)
    coef, *_ = np.linalg.lstsq(M, y, rcond=None)
    beta = coef[0]
    head = alpha * (r_a * math.log(r_a) - r_a) + beta * r_a
    if logs:
        head += coef[1] * (r_a ** 2 * math.log(r_a) / 2 - r_a ** 2 / 4) + coef[2] * r_a ** 2 / 2
    else:
        head += coef[1] * r_a ** 2 / 2
    xq, wq = _graded_panels(r_a, c, per=30)
    body = float(np.sum(wq * w_rem(xq) / xq ** (n + 1)))
    const = -sum(vf[j] * c ** (j - n) / (n - j) for j in range(n)) + vf[n] * math.log(c)
    V1 = A1 * (const + head + body)
    cs = [A * vf[j] / (n - j) for j in range(n)]
    E = A * vf[n]
    fit = epsilon_fit(sol, g, vf)
    led = VolumeLedger(
        n=n, c=cs, E=E, V=comps * V1, v=vf[1:], area=A, components=comps,
        per_component={"E": A1 * vf[n], "V": V1, "area": A1},
        fit_diagnostics={"r_a": r_a, "head": A1 * head, "beta": float(beta), "alpha": alpha, **fit})
    return led


def epsilon_fit(sol, g, vf, eps=None):
    """Independent route: fit I(eps) minus its power divergences for {E, V}.

    I(eps) is integrated directly from the numeric density; only the power
    divergences c_j eps^{j-n} (j < n) are subtracted, so the log coefficient
    is measured rather than assumed.  The o(1) model carries eps^k log eps
    columns only when the obstruction L is nonzero (otherwise the expansion
    is smooth and those columns merely degrade the conditioning).
    """
    n = g.n
    c = g.r_max
    A1 = g.boundary_area()
    eps = np.geomspace(3e-3 * c, 0.1 * c, 30) if eps is None else np.asarray(eps, dtype=float)

    def integrand(r):
        return (density(sol, r) - sum(vf[j] * r ** j for j in range(n))) / r ** (n + 1)

    const = -sum(vf[j] * c ** (j - n) / (n - j) for j in range(n))
    Is = []
    for e in eps:
        xq, wq = _graded_panels(e, c, per=30)
        Is.append(A1 * (float(np.sum(wq * integrand(xq))) + const))
    Is = np.array(Is)
    le = np.log(eps)
    cols = [-le, np.ones_like(eps)]
    if float(sol.Lcal) != 0.0:
        for k in (1, 2, 3):
            cols += [eps ** k * le, eps ** k]
    else:
        cols += [eps ** k for k in (1, 2, 3, 4)]
    B = np.stack(cols, axis=1)
    scale = np.abs(B).max(axis=0)
    coef, _res, _rank, sv = np.linalg.lstsq(B / scale, Is, rcond=None)
    cond = float(sv[0] / sv[-1])
    resid = float(np.max(np.abs((B / scale) @ coef - Is)))
    coef = coef / scale
    if cond > 1e8:
        raise YamabeError("ill-conditioned finite-part fit")
    k = g.components
    return {"E_fit": k * float(coef[0]), "V_fit": k * float(coef[1]), "cond": cond, "fit_residual": resid,
            "eps_range": [float(eps[0]), float(eps[-1])], "columns": len(cols)}


# local polyhomogeneous expansion

def _order_solve(defect, coeffs, k, jmax, exact):
    """Fix the r^k log^j coefficients (j <= jmax) so that defect(coeffs) loses its order-k terms.

    The defect is linear in these coefficients at order k, so the map is probed
    column by column; it is triangular in the log power.
    """
    zero = Fraction(0) if exact else 0.0
    base = defect(coeffs)
    rhs = [base.coeff(k, j) for j in range(jmax + 1)]
    cols = []
    for j in range(jmax + 1):
        trial = dict(coeffs)
        trial[(k, j)] = trial.get((k, j), zero) + 1
        d = defect(trial)
        cols.append([d.coeff(k, i) - rhs[i] for i in range(jmax + 1)])
    # back substitution: column j only reaches log powers <= j
    x = [zero] * (jmax + 1)
    for i in range(jmax, -1, -1):
        acc = rhs[i] + sum(cols[j][i] * x[j] for j in range(i + 1, jmax + 1))
        piv = cols[i][i]
        if piv == 0:
            if acc != 0:
                raise YamabeError(f"resonant order {k} with nonzero obstruction")
            continue
        x[i] = -acc / piv
    for j, v in enumerate(x):
        if v != 0:
            coeffs[(k, j)] = coeffs.get((k, j), zero) + v
    return coeffs


def local_expansion(sol: SYSolution, K=None, a_next=None):
    """Float polyhomogeneous series of ut through r^K.

    Everything is formal once the global coefficient u_{n+1} of r^{n+1} is
    known; that one number is taken from ``a_next`` or fitted against the
    collocation solution.  The series stops where log^3 would enter.
    """
    g = sol.geometry
    n = g.n
    K = 3 * (n + 1) - 1 if K is None else K
    P, Rb = background_series(g, K + 1)
    P, Rb = P.to_float(), Rb.to_float()

    def defect(cs):
        ut = PolyLogSeries(cs, 0, K, False)
        return yamabe_defect(ut, P, Rb, n)

    def build(a):
        cs = {kj: float(c) for kj, c in sol.formal.terms.items()}
        cs[(n + 1, 0)] = a
        for k in range(n + 2, K + 1):
            cs = _order_solve(defect, cs, k, 2, False)
        return PolyLogSeries(cs, 0, K, False)

    if a_next is not None:
        return build(a_next)
    c = g.r_max
    r = np.geomspace(0.01 * c, 0.04 * c, 12)
    num = sol.ut(r)
    a = sol.u_next if np.isfinite(sol.u_next) else 0.0
    for _ in range(3):
        s = build(a)
        da = np.median((num - np.array([s(x) for x in r])) / r ** (n + 1))
        a += da
        if abs(da) < 1e-15 * max(1.0, abs(a)):
            break
    return build(a)
