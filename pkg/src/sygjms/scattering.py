"""Scattering data of the singular Yamabe metric, one boundary mode at a time.

On a mode v = v(r) e(x) the equation (Lap_g + s(n-s)) v = 0 reads

    u^2 v'' + (u^2 P - (n-1) u u') v' + (s(n-s) - u^2 lam) v = 0,

and v = r^{n-sigma} psi turns it into  D_sigma psi = 0  with

    D_sigma = r ut^2 d^2 + Q1 d + Q0,
    Q1 = (n+1-2 sigma) ut^2 + (1-n) r ut ut' + r ut^2 P,
    Q0 = sigma(n-sigma)(1-ut^2)/r + (n-sigma) ut^2 P - (n-1)(n-sigma) ut ut' - r ut^2 lam.

The Frobenius factors F (sigma = s) and G (sigma = n-s) are built as
polyhomogeneous series; S(s) = beta/alpha comes from matching the interior
solution against alpha r^{n-s} F + beta r^s G at a small radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import sympy as sp

from . import cheb
from .constants import residue_c
from .model import ModelGeometry, Mode
from .series import INF, PolyLogSeries
from .yamabe import SYSolution, background_series, local_expansion


class ScatteringError(RuntimeError):
    pass


S_SYMBOL = sp.Symbol("s")


# series side

def _zero_series(exact):
    return PolyLogSeries({}, 0, INF, exact)


def mode_lambda_series(g: ModelGeometry, mode: Mode, order, exact=None):
    """Tangential eigenvalue lam(r) of the mode as a series through r^order."""
    exact = g.exact if exact is None else exact
    ps = g.psi_series(order)
    if not exact:
        ps = [p.to_float() for p in ps]
    if mode.trivial:
        return _zero_series(exact)
    if g.kind == "TorusSlab":
        two_pi_sq = 4 * sp.pi ** 2 if exact else 4 * math.pi ** 2
        lam = _zero_series(exact)
        for k, p in zip(mode.k, ps):
            if k:
                lam = lam + p.power(-2) * (two_pi_sq * k * k)
        return lam.truncate(order)
    ev = mode.l * (mode.l + g.n - 1)
    return (ps[0].power(-2) * (Fraction(ev) if exact else float(ev))).truncate(order)


def operator_series(ut, P, lam, n, sigma):
    """(r ut^2, Q1, Q0) of D_sigma as series."""
    one = 1 if ut.exact else 1.0
    u2 = ut * ut
    uu = ut * ut.derivative()
    u2P = u2 * P
    Q1 = u2 * (n + 1 - 2 * sigma) + uu.shift(1) * (1 - n) + u2P.shift(1)
    Q0 = ((1 - u2) * one).shift(-1) * (sigma * (n - sigma)) + u2P * (n - sigma) \
        - uu * ((n - 1) * (n - sigma)) - (u2 * lam).shift(1)
    return u2.shift(1), Q1, Q0


def apply_operator(ops, psi):
    a2, a1, a0 = ops
    d1 = psi.derivative()
    return a2 * d1.derivative() + a1 * d1 + a0 * psi


def _simplify(c):
    return sp.cancel(c) if isinstance(c, sp.Basic) else c


def _is_zero(c):
    if isinstance(c, sp.Basic):
        return sp.simplify(c) == 0
    return c == 0


def frobenius_recursion(ops, n, sigma, order, exact, log_branch=None, tol=1e-9):
    """Coefficients f_{j,i} of psi = sum f_{j,i} r^j log^i r, psi(0) = 1, D_sigma psi = O(r^order).

    Order j is fixed by the r^{j-1} coefficients of D_sigma(psi), whose
    diagonal is the indicial factor j(j + n - 2 sigma).  At an exact
    resonance the r^j coefficient is free (set to 0) and the log terms are
    fixed instead; off the designated branch that is an indicial collision.
    """
    zero = Fraction(0) if exact else 0.0
    one = Fraction(1) if exact else 1.0
    coeffs = {(0, 0): one}
    resonances = []
    for j in range(1, order + 1):
        cur = apply_operator(ops, PolyLogSeries(coeffs, 0, INF, exact))
        b = [_simplify(cur.coeff(j - 1, i)) for i in range(3)]
        M = []
        for c in range(3):
            col = apply_operator(ops, PolyLogSeries({(j, c): one}, 0, INF, exact))
            M.append([col.coeff(j - 1, i) for i in range(3)])
        d = j * (j + n - 2 * sigma)
        if exact:
            resonant = _is_zero(d)
        else:
            resonant = abs(d) < tol * j * j
        x = [zero] * 3
        if not resonant:
            for i in (2, 1, 0):
                acc = b[i] + sum(M[c][i] * x[c] for c in range(i + 1, 3))
                x[i] = _simplify(-acc / d)
        else:
            allowed = exact if log_branch is None else log_branch
            if not allowed or not exact:
                raise ScatteringError("indicial collision")
            if not _is_zero(b[2]):
                raise ScatteringError("log power beyond the series cap at the resonant order")
            x[2] = _simplify(-b[1] / M[2][1]) if not _is_zero(b[1]) else zero
            x[1] = _simplify(-(b[0] + M[2][0] * x[2]) / M[1][0])
            resonances.append(j)
        for i, v in enumerate(x):
            if not _is_zero(v):
                coeffs[(j, i)] = v
    return PolyLogSeries(coeffs, 0, order, exact), resonances


def _exact_setup(sol: SYSolution, mode, J):
    g = sol.geometry
    if not g.exact:
        raise ScatteringError("exact Frobenius data need an exact geometry")
    P, _ = background_series(g, J)
    ut = sol.formal.truncate(J)
    lam = mode_lambda_series(g, mode, J, True)
    return ut, P, lam


def frobenius_expand(sol: SYSolution, s, mode: Mode = Mode(), order=None, log_branch=None):
    """(F, G) through r^J (J <= n), with base exponents n - s and s.

    Exact when the geometry is exact and s is rational or symbolic; a float s
    runs the same recursion in floating point.
    """
    g = sol.geometry
    n = g.n
    J = n if order is None else order
    if J > n:
        raise ScatteringError("Frobenius order beyond n needs global data (use scatter_solve)")
    exact = g.exact and not isinstance(s, float)
    if exact:
        s = s if isinstance(s, sp.Basic) else Fraction(s)
        ut, P, lam = _exact_setup(sol, mode, J)
    else:
        s = float(s)
        P, _ = background_series(g, J)
        ut, P = sol.formal.to_float().truncate(J), P.to_float()
        lam = mode_lambda_series(g, mode, J, False)
    out = []
    for sigma in (s, n - s):
        ops = operator_series(ut, P, lam, n, sigma)
        psi, res = frobenius_recursion(ops, n, sigma, J, exact, log_branch)
        base = n - sigma
        if isinstance(base, Fraction) and base.denominator == 1:
            base = int(base)
        out.append(PolyLogSeries(psi.terms, base, J, exact))
    return tuple(out)


def log_coefficient(sol: SYSolution, q, mode: Mode = Mode()):
    """g_q: the r^q log r coefficient of F on the branch s = (n + q)/2 (exact)."""
    n = sol.n
    F, _ = frobenius_expand(sol, Fraction(n + q, 2), mode, order=q, log_branch=True)
    return F.coeff(q, 1)


def a_coefficients(sol: SYSolution, order=None):
    """a_j(s) of F_s = 1 + a_1(s) r + ... (trivial mode) as rational functions of s.

    Returns {"a": [a_1, ..], "a_prime": [a_1'(n), ..], "evaluate": fn(s) -> floats}.
    """
    n = sol.n
    J = n if order is None else order
    F, _ = frobenius_expand(sol, S_SYMBOL, Mode(), order=J)
    s = S_SYMBOL
    a = [sp.cancel(sp.sympify(F.coeff(j))) for j in range(1, J + 1)]
    ap = [sp.nsimplify(sp.cancel(sp.diff(x, s)).subs(s, n)) for x in a]

    def evaluate(sv):
        return [float(x.subs(s, sv)) for x in a]

    return {"a": a, "a_prime": ap, "evaluate": evaluate}


# numeric side

@dataclass
class ModeScatteringDatum:
    s: float
    mode: Mode
    F_series: PolyLogSeries
    G_series: PolyLogSeries
    S_value: float
    match_conditioning: float
    pole_flag: bool
    eps: float
    N: int
    eps_change: float = float("nan")
    notes: list = field(default_factory=list)

    def as_dict(self):
        return {"s": self.s, "mode": self.mode.label(), "S": self.S_value,
                "conditioning": self.match_conditioning, "pole_flag": self.pole_flag,
                "eps": self.eps, "N": self.N, "eps_change": self.eps_change, "notes": self.notes}


def _local(sol: SYSolution):
    """Local ut series through the log cap, cached on the solution."""
    cache = sol.__dict__.setdefault("_scatter_cache", {})
    if "ut" not in cache:
        cache["ut"] = local_expansion(sol)
    return cache["ut"]


def frobenius_numeric(sol: SYSolution, s, mode: Mode):
    """Float (F, G) to the highest order the local ut series supports."""
    g = sol.geometry
    n = g.n
    ut = _local(sol)
    K = ut.order
    cache = sol.__dict__.setdefault("_scatter_cache", {})
    key = ("bg", mode)
    if key not in cache:
        P, _ = background_series(g, K)
        cache[key] = (P.to_float(), mode_lambda_series(g, mode, K, False))
    P, lam = cache[key]
    out = []
    for sigma in (s, n - s):
        psi, _ = frobenius_recursion(operator_series(ut, P, lam, n, sigma), n, sigma, K, False)
        out.append(PolyLogSeries(psi.terms, n - sigma, psi.order, False))
    return tuple(out)


def _eval_branch(series, x):
    """(phi, x phi') at x for phi = x^base * psi."""
    b = float(series.base)
    psi = PolyLogSeries(series.terms, 0, series.order, False)
    v = psi(x)
    dv = psi.derivative()(x)
    return x ** b * v, x ** b * (b * v + x * dv)


def _outer(sol: SYSolution, s, mode, x_lo, x_hi, v0, vx0, N):
    """Collocation in x = log r on [x_lo, x_hi] with (v, v_x) given at x_hi; returns (v, v_x) at x_lo."""
    g = sol.geometry
    n = g.n
    x = cheb.nodes(N, x_lo, x_hi)
    D = cheb.diff_matrix(N, x_lo, x_hi)
    r = np.exp(x)
    ut, dut = sol.ut(r), sol.ut(r, 1)
    P = g.radial(r)["P"]
    lam = g.lam(r, mode)
    a = r * P - n - (n - 1) * r * dut / ut
    b = s * (n - s) / ut ** 2 - r * r * lam
    M = D @ D + a[:, None] * D + np.diag(b)
    rhs = np.zeros(N + 1)
    M[N - 1] = 0.0
    M[N - 1, N] = 1.0
    rhs[N - 1] = v0
    M[N] = D[N]
    rhs[N] = vx0
    v = np.linalg.solve(M, rhs)
    return v[0], float(D[0] @ v)


def _ball_interior(sol: SYSolution, s, mode, r_m, N):
    """v_r / v at r_m for the solution regular at the centre (v = rho^l w)."""
    g = sol.geometry
    n = g.n
    l = mode.l
    L = float(g.length)
    rm = L - r_m
    rho = cheb.nodes(N, 0.0, rm)
    D = cheb.diff_matrix(N, 0.0, rm)
    x = rho[1:]
    r = L - x
    prof = g.profiles[0]
    ph, dph = prof(x), prof(x, 1)
    u, ur = sol.u(r), sol.u(r, 1)
    # rho * (w'' + (2l/rho + p) w' + (l(l-1)/rho^2 + l p/rho + q) w), singular parts cancelled
    p1 = 2 * l + n * x * dph / ph + (n - 1) * x * ur / u
    p0 = (l * n * (x * dph - ph) / (x * ph) + l * (l + n - 1) * (ph - x) * (ph + x) / (x * ph ** 2)
          + l * (n - 1) * ur / u + x * s * (n - s) / u ** 2)
    M = np.zeros((N + 1, N + 1))
    M[0, 0] = 1.0
    M[1:] = x[:, None] * (D @ D)[1:] + p1[:, None] * D[1:] + np.diag(p0) @ np.eye(N + 1)[1:]
    rhs = np.zeros(N + 1)
    rhs[0] = 1.0
    w = np.linalg.solve(M, rhs)
    return -(l / rm + float(D[-1] @ w) / w[-1])


def _match(sol, s, mode, F, G, eps, N):
    g = sol.geometry
    if g.kind == "TorusSlab":
        c = g.r_max
        x_hi = math.log(c)
        v0, vx0 = (1.0, 0.0) if mode.parity == "even" else (0.0, c)
    else:
        r_m = 0.5 * float(g.length)
        y = _ball_interior(sol, s, mode, r_m, N)
        x_hi = math.log(r_m)
        v0, vx0 = 1.0, r_m * y
    v, vx = _outer(sol, s, mode, math.log(eps), x_hi, v0, vx0, N)
    p1, p1x = _eval_branch(F, eps)
    p2, p2x = _eval_branch(G, eps)
    S = -(p1x * v - p1 * vx) / (p2x * v - p2 * vx)
    cond = abs(p2x * v - p2 * vx) / (math.hypot(p2, p2x) * math.hypot(v, vx))
    return S, cond


EPS_LADDER = (0.01, 0.02, 0.04, 0.08, 0.12)
ROUNDOFF = 1e-12


def _tail(series, x):
    """Estimated size of the first omitted order of a series at x."""
    K = series.order
    lx = abs(math.log(x))
    size = [sum(abs(c) * x ** k * lx ** j for (k, j), c in series.terms.items() if k == kk)
            for kk in (K - 1, K)]
    if size[0] > 0 and size[1] > 0:
        return size[1] * min(1.0, size[1] / size[0])
    return max(size)


def choose_eps(sol, F, G):
    """Largest ladder radius whose F/G and ut tails stay at roundoff level."""
    c = sol.geometry.r_max
    ut = _local(sol)
    best = EPS_LADDER[0] * c
    for a in EPS_LADDER:
        e = a * c
        if max(_tail(F, e), _tail(G, e), _tail(ut, e)) <= ROUNDOFF:
            best = e
    return best


def scatter_solve(sol: SYSolution, s, mode: Mode = Mode(), eps=None, N=48, check=True, tol=None,
                  threshold=1e-10) -> ModeScatteringDatum:
    """S(s; mode) by matching the interior solution to the Frobenius pair at r = eps.

    The r^s part is a factor eps^(2s-n) below the r^(n-s) part at the matching
    radius, so rounding is amplified by that factor; eps defaults to the
    largest radius where the series tails are negligible.  With tol=None the
    eps/2 consistency check uses max(1e-8, that rounding floor).
    """
    g = sol.geometry
    n = g.n
    s = float(s)
    if not -0.5 < s < n + 0.5:
        raise ScatteringError("s outside the strip (-1/2, n + 1/2)")
    if abs(s - n / 2) < 1e-12:
        raise ScatteringError("s = n/2 excluded")
    if g.kind == "TorusSlab" and mode.parity not in ("even", "odd"):
        raise ScatteringError("slab modes need a parity sector")
    F, G = frobenius_numeric(sol, s, mode)
    eps = choose_eps(sol, F, G) if eps is None else eps
    S, cond = _match(sol, s, mode, F, G, eps, N)
    if cond < threshold:
        raise ScatteringError("near L2 eigenvalue: s(n-s) in sigma_pp suspected")
    q = 2 * s - n
    near = abs(q - round(q)) < 0.05 and 1 <= round(q) <= n
    datum = ModeScatteringDatum(s=s, mode=mode, F_series=F, G_series=G, S_value=float(S),
                                match_conditioning=float(cond), pole_flag=bool(near or cond < 1e-6),
                                eps=eps, N=N)
    if check:
        S2, _ = _match(sol, s, mode, F, G, eps / 2, N)
        scale = max(1.0, abs(S))
        datum.eps_change = float(abs(S2 - S))
        floor = ROUNDOFF * (eps / (2 * g.r_max)) ** (n - 2 * s)
        lim = max(1e-8, floor) if tol is None else tol
        datum.notes.append(f"eps check limit {lim:.1e} (rounding floor {floor:.1e})")
        if datum.eps_change > lim * scale:
            raise ScatteringError(f"Frobenius order insufficient (eps change {datum.eps_change:.2e})")
    return datum


# derived quantities

@dataclass
class LadderResult:
    """A value extracted from an s-ladder, with its fit residual and delta-halving change."""
    value: float
    fit_residual: float
    halving_change: float
    delta: float
    extra: dict = field(default_factory=dict)


def _S(sol, s, mode, N):
    return scatter_solve(sol, s, mode, N=N, check=False).S_value


def _even_fit(xs, ys):
    """Least-squares y = a0 + a1 x^2 + a2 x^4; returns (a0, rms residual)."""
    xs = np.asarray(xs)
    A = np.stack([np.ones_like(xs), xs ** 2, xs ** 4], axis=1)
    coef, *_ = np.linalg.lstsq(A, np.asarray(ys), rcond=None)
    res = np.asarray(ys) - A @ coef
    return float(coef[0]), float(np.sqrt(np.mean(res ** 2)))


def _ladder(sol, s0, mode, delta, N, part):
    xs = [k * delta for k in (1, 2, 3, 4)]
    ys = []
    for x in xs:
        sp_, sm = _S(sol, s0 + x, mode, N), _S(sol, s0 - x, mode, N)
        ys.append(x * (sp_ - sm) / 2 if part == "odd" else (sp_ + sm) / 2)
    return _even_fit(xs, ys)


def _adaptive_ladder(sol, s0, mode, delta, N, part, tol, halvings):
    """Halve delta until the even fit passes; returns (value, residual, halving change, delta)."""
    for _ in range(halvings + 1):
        a, res = _ladder(sol, s0, mode, delta, N, part)
        if res <= tol * max(1.0, abs(a)):
            a2, _ = _ladder(sol, s0, mode, delta / 2, N, part)
            return a, res, abs(a - a2), delta
        delta /= 2
    return None, res, float("nan"), delta


def residue_extract(sol: SYSolution, q: int, mode: Mode = Mode(), delta=0.005, N=48, tol=1e-8,
                    halvings=3):
    """Residue of S(s; mode) at s = (n+q)/2 and the P_q eigenvalue -Res/c_q.

    x (S(s0+x) - S(s0-x))/2 = Res + O(x^2) is fitted on x = delta*{1,2,3,4}
    (delta halved while the fit is poor) and compared with the fit at
    delta/2.  For q = 1 (c_1 = 0) the value is None and extra["vanishes"]
    records whether the residue itself is zero.
    """
    n = sol.n
    if not 1 <= q <= n:
        raise ScatteringError("q must lie in 1..n")
    s0 = (n + q) / 2
    A, res, change, d = _adaptive_ladder(sol, s0, mode, delta, N, "odd", tol, halvings)
    if A is None:
        raise ScatteringError(f"pole model rejected (fit residual {res:.2e})")
    c_q = float(residue_c(q, n))
    out = LadderResult(value=None, fit_residual=res, halving_change=change, delta=d,
                       extra={"residue": A, "c_q": c_q, "s0": s0, "mode": mode.label()})
    if c_q == 0:
        out.extra["vanishes"] = abs(A) <= tol
        return out
    out.value = -A / c_q
    out.halving_change = change / abs(c_q)
    return out


def q_curvature(sol: SYSolution, delta=0.005, N=48, tol=1e-9, halvings=3):
    """Q = S(n)1 / c_n from the holomorphic value of S(s; 0) across s = n."""
    n = sol.n
    B, res, change, d = _adaptive_ladder(sol, float(n), Mode(), delta, N, "even", tol, halvings)
    if B is None:
        raise ScatteringError(f"holomorphic extension failed (fit residual {res:.2e})")
    c_n = float(residue_c(n, n))
    return LadderResult(value=B / c_n, fit_residual=res, halving_change=change / abs(c_n),
                        delta=d, extra={"S_n": B, "c_n": c_n})


def s_derivative(sol: SYSolution, delta=0.02, levels=4, N=48, floor=1e-7):
    """dS/ds at s = n on constants: central differences with a Richardson tableau."""
    n = sol.n
    T = []
    for i in range(levels):
        h = delta / 2 ** i
        row = [(_S(sol, n + h, Mode(), N) - _S(sol, n - h, Mode(), N)) / (2 * h)]
        for k in range(1, i + 1):
            row.append(row[k - 1] + (row[k - 1] - T[i - 1][k - 1]) / (4 ** k - 1))
        T.append(row)
    diag = [T[i][i] for i in range(levels)]
    steps = [abs(b - a) for a, b in zip(diag, diag[1:])]
    scale = max(1.0, abs(diag[-1]))
    for a, b in zip(steps, steps[1:]):
        if b > a and b > floor * scale:
            raise ScatteringError("derivative unstable (non-monotone Richardson tableau)")
    return LadderResult(value=diag[-1], fit_residual=float("nan"),
                        halving_change=steps[-1] if steps else float("nan"), delta=delta,
                        extra={"tableau": T})


def fractional_op(sol: SYSolution, gamma, mode: Mode = Mode(), **kw) -> ModeScatteringDatum:
    """Mode eigenvalue of the fractional operator P_{2 gamma} = S(n/2 + gamma)."""
    gamma = float(gamma)
    if not 0 < gamma < sol.n / 2 + 0.5:
        raise ScatteringError("gamma outside (0, n/2 + 1/2)")
    if abs(2 * gamma - round(2 * gamma)) < 1e-9:
        raise ScatteringError("2 gamma is an integer: S has a pole there (use residue_extract)")
    return scatter_solve(sol, sol.n / 2 + gamma, mode, **kw)
