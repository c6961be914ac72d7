"""The twelve acceptance criteria, one test (or test pair) each.

Criteria 6, 7 and 9 are run on the identities exactly as stated.  Those
statements disagree with their own derivations, so the stated runs fail;
each has a companion test that runs the form the derivation yields.
"""
import math
import random
import time
from fractions import Fraction
from fractions import Fraction as Fr
from math import factorial


from sygjms import scattering, verify
from sygjms.constants import residue_c
from sygjms.model import Mode, PolyProfile, boundary_invariants

import test_series as props
from conftest import MODELS
from test_scattering import hat_solution


def rel_err(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def test_ac1_constants(criterion):
    t = time.time()
    ok = all(residue_c(2 * p, n) == Fr((-1) ** p, 2 ** (2 * p) * factorial(p) * factorial(p - 1))
             for p in range(1, 6) for n in range(1, 7))
    ok &= all(residue_c(1, n) == 0 for n in range(1, 7))
    ok &= all(residue_c(2 * p + 1, n) > 0 for p in range(1, 5) for n in range(1, 7))
    dt = time.time() - t
    assert criterion("AC1 constants", ok and dt < 1, f"exact c_q table, {dt:.2f} s")


def test_ac2_hyperbolic_baseline(sol, prep, criterion):
    import numpy as np
    s = sol("ball3")
    r = np.linspace(0, 1, 201)
    ut_err = float(np.max(np.abs(s.ut(r) - (1 - r / 2))))
    q = prep("ball2")[1].value
    qf = verify.q_formula(sol("ball2").geometry)
    R = float(boundary_invariants(sol("ball2").geometry).R)
    ok = (s.residual_norm <= 1e-12 and ut_err <= 1e-12 and float(s.Lcal) == 0
          and abs(q - R / 2) <= 1e-8 and abs(qf - R / 2) <= 1e-8)
    assert criterion("AC2 hyperbolic baseline", ok,
                     f"residual {s.residual_norm:.1e}, |ut - (1 - r/2)| {ut_err:.1e}, Q2 - R/2 {q - R / 2:.1e}")


def test_ac3_frobenius_vs_recursion(sol, criterion):
    rng = random.Random(7)
    svals = [Fraction(rng.randint(-40, 40), rng.randint(1, 17)) for _ in range(5)]
    bad = []
    t = time.time()
    for name in MODELS:
        s_ = sol(name)
        n = s_.n
        H = boundary_invariants(s_.geometry).H
        hs = hat_solution(s_)
        hinv = boundary_invariants(hs.geometry)
        for s in svals:
            if 2 * s == n + 2:
                continue
            F, _ = scattering.frobenius_expand(s_, s)
            Fh, _ = scattering.frobenius_expand(hs, s)
            psi2 = (n - s) / (4 * (n - 1) * (n + 2 - 2 * s)) * (hinv.R - hinv.LoNormSq)
            if F.coeff(1) != (n - s) / (2 * n) * H or Fh.coeff(2) != psi2:
                bad.append((name, s))
    dt = time.time() - t
    assert criterion("AC3 Frobenius vs recursion", not bad,
                     f"s = {[str(x) for x in svals]}, 4 models, exact, {dt:.2f} s, mismatches {bad}")


def test_ac4_residues(sol, criterion):
    worst = {}
    for name, q, ks, tol in (("slab2", 2, [(1, 0), (0, 1), (1, 1)], 1e-6),
                             ("slab3", 3, [(1, 0, 0), (0, 1, 1), (1, 1, 1)], 1e-5)):
        s_ = sol(name)
        errs = []
        for k in ks:
            m = Mode(k=k)
            a, b = scattering.residue_extract(s_, q, m).value, verify.p_formula(s_.geometry, q, m)
            # P_3 vanishes on some modes (Lo orthogonal to k); measure against the mode scale there
            errs.append(abs(a - b) / max(abs(a), abs(b), s_.geometry.lam0(m)))
        worst[name] = (max(errs), tol)
    ok = all(e <= t for e, t in worst.values())
    assert criterion("AC4 residue/operator agreement", ok,
                     ", ".join(f"{k} P{2 if k == 'slab2' else 3} rel {e:.1e}" for k, (e, _) in worst.items()))


def test_ac5_functional_equation(sol, criterion):
    worst = 0.0
    for name, modes in (("slab2", [Mode(k=(1, 0)), Mode(k=(0, 1), parity="odd"), Mode(k=(1, 1))]),
                        ("ball3", [Mode(l=0), Mode(l=1), Mode(l=3)])):
        s_ = sol(name)
        n = s_.n
        for m in modes:
            for s in [n / 2 + d for d in (0.05, 0.15, 0.25, 0.35, 0.44)]:
                a = scattering.scatter_solve(s_, s, m).S_value
                b = scattering.scatter_solve(s_, n - s, m).S_value
                worst = max(worst, abs(a * b - 1))
    assert criterion("AC5 functional equation", worst <= 1e-8, f"max |S(s) S(n-s) - 1| = {worst:.1e}")


def _thmB(sol, prep, variant):
    out = []
    for name in ("ball2", "slab2", "slab3"):
        led, q, _ = prep(name)
        r = verify.check_thmB(sol(name), led, q, variant)
        out.append((name, r.lhs, r.rhs, rel_err(r.lhs, r.rhs)))
    return out


def test_ac6_thmB_stated(sol, prep, criterion):
    rows = _thmB(sol, prep, "stated")
    ok = all(e <= 1e-4 for *_, e in rows)
    detail = "; ".join(f"{n} E {a:.6g} vs oint Q {b:.6g}" for n, a, b, _ in rows)
    assert criterion("AC6 Theorem B (as stated)", ok, detail)


def test_ac6_thmB_derivation_form(sol, prep, criterion):
    rows = _thmB(sol, prep, "corrected")
    ok = all(e <= 1e-4 for *_, e in rows)
    assert criterion("AC6b Theorem B (E = 2 c_n oint Q)", ok,
                     f"max rel {max(e for *_, e in rows):.1e}")


def _thmC(sol, prep, variant):
    out = []
    for name in ("ball2", "slab2", "ball3", "slab3"):
        led, _, sd = prep(name)
        r = verify.check_thmC(sol(name), led, sd, variant)
        out.append((name, r.lhs, r.rhs, rel_err(r.lhs, r.rhs), abs(r.provenance["internal"])))
    return out


def test_ac7_thmC_stated(sol, prep, criterion):
    rows = _thmC(sol, prep, "stated")
    ok = all(e <= 1e-4 and i <= 1e-8 for *_, e, i in rows)
    detail = "; ".join(f"{n} V {a:.6g} vs {b:.6g} (internal {i:.1e})" for n, a, b, _, i in rows)
    assert criterion("AC7 Theorem C (as stated)", ok, detail)


def test_ac7_thmC_derivation_form(sol, prep, criterion):
    rows = _thmC(sol, prep, "corrected")
    ok = all(e <= 1e-4 and i <= 1e-8 for *_, e, i in rows)
    assert criterion("AC7b Theorem C (area weight ut^(1-n) kept)", ok,
                     f"max rel {max(r[3] for r in rows):.1e}, max internal {max(r[4] for r in rows):.1e}")


def test_ac8_thmD(sol, prep, criterion):
    rows = []
    for name, radial in (("slab2", PolyProfile([0.1, 0.2, -0.2])), ("ball3", PolyProfile([0.1, 0.0, 0.2]))):
        q = prep(name)[1]
        for om in (0.1, radial):
            r = verify.check_thmD(sol(name), om, qval=q)
            scale = max(abs(r.lhs), abs(r.rhs), abs(2 * r.provenance["c_n"] * r.provenance["omega_on_M"]
                                                     * sol(name).geometry.total_area()))
            rows.append((name, "const" if om == 0.1 else "radial", r.residual / scale))
    ok = all(e <= 1e-3 for *_, e in rows)
    assert criterion("AC8 Theorem D", ok, "; ".join(f"{a} {b} {e:.1e}" for a, b, e in rows))


def _thmE(sol, prep, variant):
    out = []
    for name in ("ball3", "slab3"):
        led = verify.gauss_bonnet_ledger(sol(name), prep(name)[2], variant)
        terms = [0.25 * led.weylSq, 0.5 * led.einsteinFP, led.sTerm, led.calC]
        target = 8 * math.pi ** 2 * led.chi
        tol = 1e-3 * 8 * math.pi ** 2 if led.chi else 1e-2 * max(abs(t) for t in terms)
        out.append((name, led.total, target, tol))
    return out


def test_ac9_thmE_stated(sol, prep, criterion):
    rows = _thmE(sol, prep, "stated")
    ok = all(abs(t - g) <= tol for _, t, g, tol in rows)
    assert criterion("AC9 Theorem E (as stated)", ok,
                     "; ".join(f"{n} total {t:.6g} vs {g:.6g} (tol {tol:.2g})" for n, t, g, tol in rows))


def test_ac9_thmE_derivation_form(sol, prep, criterion):
    rows = _thmE(sol, prep, "corrected")
    ok = all(abs(t - g) <= tol for _, t, g, tol in rows)
    assert criterion("AC9b Theorem E (C + 6 Delta)", ok,
                     "; ".join(f"{n} |res| {abs(t - g):.1e} (tol {tol:.2g})" for n, t, g, tol in rows))


def test_ac10_covariance(sol, criterion):
    bad, n = [], 0
    for name in MODELS:
        for r in verify.covariance_suite(sol(name)):
            n += 1
            if not r.passed:
                bad.append(f"{name}:{r.name}")
    assert criterion("AC10 covariance suite", not bad, f"{n} reports, failures {bad}")


def test_ac11_lemmas(sol, criterion):
    bad, n = [], 0
    for name in MODELS:
        for r in verify.lemma_suite(sol(name)):
            n += 1
            if not r.passed:
                bad.append(f"{name}:{r.name}")
    assert criterion("AC11 lemma suite", not bad, f"{n} reports, failures {bad}")


def test_ac12_property_tests(criterion):
    for fn in (props.test_ring_axioms, props.test_exp_log_round_trip, props.test_leibniz):
        fn()
    assert criterion("AC12 property tests", True, "ring axioms, exp/log, Leibniz: 1000 cases each")
